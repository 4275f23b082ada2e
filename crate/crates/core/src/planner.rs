//! Optimal costs and plans for P*-structured problems.
//!
//! Every tower is a branch hanging off the table. For each goal block,
//! bottom-up: find its branch, move everything above it to the table, then
//! move it onto the goal tower. Under the one-target-per-tower constraint
//! that procedure is optimal and its length has the closed form computed by
//! [`optimal_cost`]. [`uniform_cost_oracle`] is an independent breadth-first
//! search used to check it on small instances.

use std::collections::{HashSet, VecDeque};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::pddl::{PlanDoc, ProblemDoc};
use crate::state::{Action, BlockId, GoalSpec, Location, StateError, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct CostBreakdown {
    pub clearing: u64,
    pub construction: u64,
    pub total: u64,
}

impl CostBreakdown {
    fn new(clearing: u64, construction: u64) -> Self {
        CostBreakdown { clearing, construction, total: clearing + construction }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_states: usize,
    pub max_time: Duration,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_states: 10_000_000, max_time: Duration::from_secs(60) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("unsupported goal shape: {0}")]
    UnsupportedGoalShape(String),
    #[error("analytic planning needs an empty hand in the initial state")]
    HandNotEmpty,
    #[error(transparent)]
    State(#[from] StateError),
    #[error("search limit exceeded after {states} states ({reason})")]
    LimitExceeded { states: usize, reason: &'static str },
    #[error("goal unreachable")]
    Unsolvable,
}

/// How the goal blocks sit in the initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoalShape {
    /// Chain goal, every target in its own tower.
    Standard { targets: Vec<BlockId> },
    Retrieve { target: BlockId },
    /// Chain of `2N` targets: `N` deep targets in distinct towers, then one
    /// shallow target above each of them, in the same tower order.
    Interleaved { deep: Vec<BlockId>, shallow: Vec<BlockId> },
}

fn unsupported(msg: impl Into<String>) -> PlanError {
    PlanError::UnsupportedGoalShape(msg.into())
}

fn tower_of(state: &WorldState, x: BlockId) -> Result<(usize, usize), PlanError> {
    match state.locate(x) {
        Some(Location::Tower { tower, height }) => Ok((tower, height)),
        Some(Location::Held) => Err(PlanError::HandNotEmpty),
        None => Err(PlanError::State(StateError::UnknownBlock(x))),
    }
}

pub fn classify(state: &WorldState, goal: &GoalSpec) -> Result<GoalShape, PlanError> {
    if !state.hand_empty() {
        return Err(PlanError::HandNotEmpty);
    }
    match goal {
        GoalSpec::Retrieve(t) => {
            tower_of(state, *t)?;
            Ok(GoalShape::Retrieve { target: *t })
        }
        GoalSpec::Conjunction(_) => Err(unsupported("goal is not a single chain or retrieve")),
        GoalSpec::Chain(targets) => {
            if targets.is_empty() {
                return Err(unsupported("empty chain"));
            }
            let mut places = Vec::with_capacity(targets.len());
            for &t in targets {
                places.push(tower_of(state, t)?);
            }
            let mut towers: Vec<usize> = places.iter().map(|p| p.0).collect();
            towers.sort_unstable();
            towers.dedup();
            if towers.len() == targets.len() {
                return Ok(GoalShape::Standard { targets: targets.clone() });
            }
            let n = targets.len() / 2;
            if targets.len() % 2 != 0 || towers.len() != n {
                return Err(unsupported("targets share towers outside the interleaved pattern"));
            }
            let (deep, shallow) = targets.split_at(n);
            for i in 0..n {
                let (td, hd) = places[i];
                let (ts, hs) = places[n + i];
                if td != ts || hs <= hd {
                    return Err(unsupported(format!(
                        "target {} is not above {} in the same tower",
                        shallow[i], deep[i]
                    )));
                }
            }
            Ok(GoalShape::Interleaved { deep: deep.to_vec(), shallow: shallow.to_vec() })
        }
    }
}

fn depth_of(state: &WorldState, x: BlockId) -> u64 {
    state.depth(x).expect("classified target sits in a tower") as u64
}

/// Closed-form optimal cost.
///
/// * chain with one target per tower: `Σ 2·depth(t) + 2(|T|−1)`; a chain of
///   one block is an empty conjunction and costs 0;
/// * retrieve: `2·depth(t) + 1` (clear, then grasp);
/// * interleaved: `Σ 2·d_deep(i) + 2N`.
pub fn optimal_cost(problem: &ProblemDoc) -> Result<CostBreakdown, PlanError> {
    let state = problem.initial_state()?;
    cost_for_state(&state, &problem.goal)
}

pub fn cost_for_state(state: &WorldState, goal: &GoalSpec) -> Result<CostBreakdown, PlanError> {
    Ok(match classify(state, goal)? {
        GoalShape::Standard { targets } if targets.len() == 1 => CostBreakdown::new(0, 0),
        GoalShape::Standard { targets } => {
            let clearing = targets.iter().map(|&t| 2 * depth_of(state, t)).sum();
            CostBreakdown::new(clearing, 2 * (targets.len() as u64 - 1))
        }
        GoalShape::Retrieve { target } => CostBreakdown::new(2 * depth_of(state, target), 1),
        GoalShape::Interleaved { deep, .. } => {
            let clearing = deep.iter().map(|&t| 2 * depth_of(state, t)).sum();
            CostBreakdown::new(clearing, 2 * deep.len() as u64)
        }
    })
}

/// Length of the table-detour plan for an interleaved goal:
/// `Σ 2·d_deep(i) + 4N − 2`.
pub fn interleaved_detour_bound(state: &WorldState, goal: &GoalSpec) -> Result<u64, PlanError> {
    match classify(state, goal)? {
        GoalShape::Interleaved { deep, .. } => {
            let clearing: u64 = deep.iter().map(|&t| 2 * depth_of(state, t)).sum();
            Ok(clearing + 4 * deep.len() as u64 - 2)
        }
        _ => Err(unsupported("not an interleaved goal")),
    }
}

/// Records actions while keeping the simulated state current.
struct Builder {
    state: WorldState,
    steps: Vec<Action>,
}

impl Builder {
    fn push(&mut self, action: Action) {
        self.state.apply_mut(action).expect("synthesized action is applicable");
        self.steps.push(action);
    }

    fn grasp(&mut self, x: BlockId) {
        let (tower, height) = tower_of(&self.state, x).expect("block to grasp is in a tower");
        if height == 0 {
            self.push(Action::PickUp(x));
        } else {
            let under = self.state.towers()[tower][height - 1];
            self.push(Action::Unstack(x, under));
        }
    }

    /// Moves every block above `x` off its tower. A block goes straight onto
    /// the goal tower when it is the next chain element and the goal tower
    /// is ready for it; otherwise it goes to the table.
    fn expose(&mut self, x: BlockId, chain: &[BlockId], built: &mut usize) {
        for blocker in self.state.blocks_above(x).expect("target is in a tower") {
            self.grasp(blocker);
            let direct = *built > 0
                && *built < chain.len()
                && chain[*built] == blocker
                && self.state.is_clear(chain[*built - 1]);
            if direct {
                self.push(Action::Stack(blocker, chain[*built - 1]));
                *built += 1;
            } else {
                self.push(Action::PutDown(blocker));
            }
        }
    }
}

fn build_chain(state: &WorldState, chain: &[BlockId]) -> Vec<Action> {
    let mut b = Builder { state: state.clone(), steps: Vec::new() };
    if chain.len() < 2 {
        return b.steps;
    }
    let mut built = 0usize;
    b.expose(chain[0], chain, &mut built);
    built = built.max(1);
    while built < chain.len() {
        let idx = built;
        let target = chain[idx];
        b.expose(target, chain, &mut built);
        if built > idx {
            continue;
        }
        b.grasp(target);
        b.push(Action::Stack(target, chain[built - 1]));
        built += 1;
    }
    b.steps
}

/// Clear-and-stack plan. Its length equals [`optimal_cost`] for standard
/// chain and retrieve goals; interleaved goals are delegated to
/// [`synthesize_interleaved_plan`].
pub fn synthesize_optimal_plan(problem: &ProblemDoc) -> Result<PlanDoc, PlanError> {
    let state = problem.initial_state()?;
    synthesize_for_state(&state, &problem.goal)
}

pub fn synthesize_for_state(state: &WorldState, goal: &GoalSpec) -> Result<PlanDoc, PlanError> {
    match classify(state, goal)? {
        GoalShape::Standard { targets } => Ok(PlanDoc::new(build_chain(state, &targets))),
        GoalShape::Retrieve { target } => {
            let mut b = Builder { state: state.clone(), steps: Vec::new() };
            let mut built = 0;
            b.expose(target, &[], &mut built);
            b.grasp(target);
            Ok(PlanDoc::new(b.steps))
        }
        GoalShape::Interleaved { .. } => interleaved_for_state(state, goal),
    }
}

/// Valid plan for an interleaved goal, at most `Σ 2·d_deep + 4N − 2` long.
///
/// Clears each tower down to its deep target, builds the deep part of the
/// chain, then stacks the parked shallow targets. Returns an empty plan when
/// the goal already holds.
pub fn synthesize_interleaved_plan(problem: &ProblemDoc) -> Result<PlanDoc, PlanError> {
    let state = problem.initial_state()?;
    interleaved_for_state(&state, &problem.goal)
}

fn interleaved_for_state(state: &WorldState, goal: &GoalSpec) -> Result<PlanDoc, PlanError> {
    let GoalShape::Interleaved { deep, shallow } = classify(state, goal)? else {
        return Err(unsupported("not an interleaved goal"));
    };
    if state.satisfies(goal)? {
        return Ok(PlanDoc::default());
    }
    let chain: Vec<BlockId> = deep.iter().chain(shallow.iter()).copied().collect();
    Ok(PlanDoc::new(build_chain(state, &chain)))
}

/// Breadth-first search over states with unit action costs.
///
/// Successors are expanded in canonical action order, so the returned plan
/// is deterministic as well as shortest. States that differ only in tower
/// order are merged.
pub fn uniform_cost_oracle(problem: &ProblemDoc, limits: SearchLimits) -> Result<PlanDoc, PlanError> {
    let state = problem.initial_state()?;
    oracle_for_state(&state, &problem.goal, limits)
}

pub fn oracle_for_state(
    init: &WorldState,
    goal: &GoalSpec,
    limits: SearchLimits,
) -> Result<PlanDoc, PlanError> {
    if init.satisfies(goal)? {
        return Ok(PlanDoc::default());
    }
    let started = Instant::now();
    // (state, parent index, action that produced it)
    let mut nodes: Vec<(WorldState, usize, Option<Action>)> = vec![(init.clone(), usize::MAX, None)];
    let mut seen = HashSet::new();
    seen.insert(init.canonical());
    let mut frontier = VecDeque::from([0usize]);

    while let Some(idx) = frontier.pop_front() {
        if idx % 1024 == 0 && started.elapsed() > limits.max_time {
            return Err(PlanError::LimitExceeded { states: seen.len(), reason: "time" });
        }
        let current = nodes[idx].0.clone();
        for action in current.applicable_actions() {
            let next = current.apply(action).expect("applicable action");
            let key = next.canonical();
            if seen.contains(&key) {
                continue;
            }
            if next.satisfies(goal)? {
                let mut steps = vec![action];
                let mut at = idx;
                while let Some(a) = nodes[at].2 {
                    steps.push(a);
                    at = nodes[at].1;
                }
                steps.reverse();
                return Ok(PlanDoc::new(steps));
            }
            if seen.len() >= limits.max_states {
                return Err(PlanError::LimitExceeded { states: seen.len(), reason: "states" });
            }
            seen.insert(key);
            nodes.push((next, idx, Some(action)));
            frontier.push_back(nodes.len() - 1);
        }
    }
    Err(PlanError::Unsolvable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{b, validate};

    fn doc(state: &WorldState, goal: GoalSpec) -> ProblemDoc {
        ProblemDoc {
            name: "t".into(),
            objects: (1..=state.n_blocks() as u32).map(b).collect(),
            init: state.to_predicates(),
            goal,
            layout: Default::default(),
        }
    }

    #[test]
    fn two_tower_chain() {
        // towers [[t1,x],[y,t2]] with t1=1, x=2, y=3, t2=4
        let s = WorldState::from_indices(&[&[1, 2], &[3, 4]], None);
        let p = doc(&s, GoalSpec::Chain(vec![b(1), b(4)]));
        assert_eq!(optimal_cost(&p).unwrap(), CostBreakdown { clearing: 2, construction: 2, total: 4 });
        let plan = synthesize_optimal_plan(&p).unwrap();
        assert_eq!(
            plan.steps,
            vec![
                Action::Unstack(b(2), b(1)),
                Action::PutDown(b(2)),
                Action::Unstack(b(4), b(3)),
                Action::Stack(b(4), b(1)),
            ]
        );
        assert_eq!(uniform_cost_oracle(&p, SearchLimits::default()).unwrap().len(), 4);
    }

    #[test]
    fn trivial_goals() {
        let s = WorldState::from_indices(&[&[1]], None);
        let single = doc(&s, GoalSpec::Chain(vec![b(1)]));
        assert_eq!(optimal_cost(&single).unwrap().total, 0);
        assert!(synthesize_optimal_plan(&single).unwrap().is_empty());
        let retrieve = doc(&s, GoalSpec::Retrieve(b(1)));
        assert_eq!(optimal_cost(&retrieve).unwrap().total, 1);
        assert_eq!(synthesize_optimal_plan(&retrieve).unwrap().steps, vec![Action::PickUp(b(1))]);
    }

    #[test]
    fn buried_single_target_chain_costs_nothing() {
        let s = WorldState::from_indices(&[&[1, 2, 3]], None);
        let p = doc(&s, GoalSpec::Chain(vec![b(1)]));
        assert_eq!(optimal_cost(&p).unwrap().total, 0);
        assert_eq!(uniform_cost_oracle(&p, SearchLimits::default()).unwrap().len(), 0);
    }

    #[test]
    fn unsupported_shapes() {
        let s = WorldState::from_indices(&[&[1, 2, 3], &[4]], None);
        let shared = doc(&s, GoalSpec::Chain(vec![b(4), b(1), b(2)]));
        assert!(matches!(optimal_cost(&shared), Err(PlanError::UnsupportedGoalShape(_))));
        let upside = doc(&s, GoalSpec::Chain(vec![b(2), b(4), b(1), b(3)]));
        assert!(matches!(optimal_cost(&upside), Err(PlanError::UnsupportedGoalShape(_))));
        let held = WorldState::from_indices(&[&[1]], Some(2));
        assert_eq!(optimal_cost(&doc(&held, GoalSpec::Retrieve(b(1)))), Err(PlanError::HandNotEmpty));
    }

    #[test]
    fn interleaved_satisfied_short_circuit() {
        let s = WorldState::from_indices(&[&[1, 2]], None);
        let p = doc(&s, GoalSpec::Chain(vec![b(1), b(2)]));
        assert!(synthesize_interleaved_plan(&p).unwrap().is_empty());
    }

    #[test]
    fn interleaved_single_tower_with_gap() {
        // tower [t_deep, x, t_shallow]
        let s = WorldState::from_indices(&[&[1, 2, 3]], None);
        let p = doc(&s, GoalSpec::Chain(vec![b(1), b(3)]));
        let plan = synthesize_interleaved_plan(&p).unwrap();
        assert_eq!(plan.len(), 6);
        assert!(validate(&s, &p.goal, &plan.steps).is_ok());
        assert_eq!(uniform_cost_oracle(&p, SearchLimits::default()).unwrap().len(), 6);
        assert_eq!(interleaved_detour_bound(&s, &p.goal).unwrap(), 6);
    }

    #[test]
    fn oracle_respects_limits() {
        let s = WorldState::from_indices(&[&[1, 2, 3, 4, 5, 6]], None);
        let p = doc(&s, GoalSpec::Chain(vec![b(6), b(5), b(4), b(3), b(2), b(1)]));
        let tight = SearchLimits { max_states: 10, max_time: Duration::from_secs(5) };
        assert!(matches!(uniform_cost_oracle(&p, tight), Err(PlanError::LimitExceeded { .. })));
    }

    #[test]
    fn oracle_is_deterministic() {
        let s = WorldState::from_indices(&[&[2, 4, 1], &[3]], None);
        let p = doc(&s, GoalSpec::Retrieve(b(4)));
        let first = uniform_cost_oracle(&p, SearchLimits::default()).unwrap();
        assert_eq!(first.steps, vec![Action::Unstack(b(1), b(4)), Action::PutDown(b(1)), Action::Unstack(b(4), b(2))]);
        assert_eq!(first, uniform_cost_oracle(&p, SearchLimits::default()).unwrap());
    }
}
