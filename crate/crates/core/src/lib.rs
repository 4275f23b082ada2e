//! P*-structured Blocksworld benchmark engine: executable semantics, PDDL
//! text formats, analytic optimal planning, curriculum generation, the
//! graph-rewrite twin domain and an evaluation harness for plan producers.

pub mod generator;
pub mod graphrw;
pub mod harness;
pub mod par;
pub mod pddl;
pub mod planner;
pub mod state;

pub use pddl::{ParseMode, PlanDoc, ProblemDoc};
pub use state::{Action, BlockId, GoalSpec, Predicate, WorldState};
