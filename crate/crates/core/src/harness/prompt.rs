//! One-shot prompt assembly for both representations.

use serde::{Deserialize, Serialize};

use crate::graphrw::{emit_graph_exemplar, emit_graph_plan, emit_graph_problem, translate_plan, RULES_PREAMBLE};
use crate::pddl::{emit_plan, emit_problem, parse_plan, parse_problem, ParseMode, PlanDoc, ProblemDoc, DOMAIN_PDDL};
use crate::state::validate;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    #[default]
    Blocksworld,
    Graph,
}

impl std::str::FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "blocksworld" | "blocks" | "bw" => Ok(Representation::Blocksworld),
            "graph" => Ok(Representation::Graph),
            other => Err(format!("unknown representation `{other}`")),
        }
    }
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Representation::Blocksworld => "blocksworld",
            Representation::Graph => "graph",
        })
    }
}

const PLAN_INSTRUCTION: &str = "Provide only the correct pddl plan. Do not add numbers, items or any additional text. \
Follow the syntax of the above examplars for the plan if provided. Your plan as plain text:\n";
const EXEMPLAR_INSTRUCTION: &str = "Provide only the result. Do not add numbers, items or any additional text. \
Follow the format of the above examplars without additional formatting:\n";
// sic: the closing line spells "exemplars", the two above "examplars"
const TASK_INSTRUCTION: &str = "Provide only the result. Do not add numbers, items or any additional text. \
Follow the format of the above exemplars without additional formatting:\n";

/// The four-block exemplar shown before every task.
pub const EXEMPLAR_PROBLEM: &str = "(define (problem BW-rand-4)
(:domain blocksworld-4ops)
(:objects b2 b4 b1 b3)
(:init
(clear b1)
(ontable b2)
(ontable b3)
(clear b3)
(on b1 b4)
(on b4 b2)
(handempty)
)
(:goal (and
(on b2 b1)
(on b4 b3)
))
)
";

pub const EXEMPLAR_PLAN: &str = "(unstack b1 b4)
(put-down b1)
(unstack b4 b2)
(stack b4 b3)
(pick-up b2)
(stack b2 b1)";

pub fn default_exemplar() -> (ProblemDoc, PlanDoc) {
    let problem = parse_problem(EXEMPLAR_PROBLEM).expect("built-in exemplar parses");
    let plan = parse_plan(EXEMPLAR_PLAN, ParseMode::Strict).expect("built-in exemplar plan parses");
    (problem, plan)
}

/// Prompt pieces; [`PromptBundle::render`] joins them with the fixed
/// instruction lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub representation: Representation,
    pub domain_text: String,
    pub exemplar_problem_text: String,
    pub exemplar_plan_text: String,
    pub target_problem_text: String,
}

fn lines_with_newlines(text: &str) -> String {
    let mut out = String::new();
    for line in text.lines() {
        out.push_str(line);
        out.push('\n');
    }
    out
}

impl PromptBundle {
    pub fn render(&self) -> String {
        let plan = lines_with_newlines(&self.exemplar_plan_text);
        match self.representation {
            Representation::Blocksworld => [
                self.domain_text.as_str(),
                "\n",
                PLAN_INSTRUCTION,
                "\n\n**Example**\n\n",
                &self.exemplar_problem_text,
                "\n",
                EXEMPLAR_INSTRUCTION,
                &plan,
                "\n**TASK**\n\n",
                &self.target_problem_text,
                TASK_INSTRUCTION,
            ]
            .concat(),
            Representation::Graph => [
                self.domain_text.as_str(),
                "Example Input\n\n",
                &self.exemplar_problem_text,
                "\nSolution:\n",
                &plan,
                "\nYour task:\n",
                &self.target_problem_text,
            ]
            .concat(),
        }
    }
}

pub fn build_prompt(
    problem: &ProblemDoc,
    exemplar: (&ProblemDoc, &PlanDoc),
    representation: Representation,
) -> Result<PromptBundle, HarnessError> {
    let (ex_problem, ex_plan) = exemplar;
    let invalid = |m: String| HarnessError::InvalidExemplar(m);
    let ex_init = ex_problem.initial_state().map_err(|e| invalid(e.to_string()))?;
    validate(&ex_init, &ex_problem.goal, &ex_plan.steps).map_err(|e| invalid(e.to_string()))?;
    Ok(match representation {
        Representation::Blocksworld => PromptBundle {
            representation,
            domain_text: DOMAIN_PDDL.to_string(),
            exemplar_problem_text: emit_problem(ex_problem).map_err(|e| invalid(e.to_string()))?,
            exemplar_plan_text: emit_plan(ex_plan),
            target_problem_text: emit_problem(problem)?,
        },
        Representation::Graph => PromptBundle {
            representation,
            domain_text: RULES_PREAMBLE.to_string(),
            exemplar_problem_text: emit_graph_exemplar(ex_problem).map_err(|e| invalid(e.to_string()))?,
            exemplar_plan_text: emit_graph_plan(&translate_plan(ex_plan)),
            target_problem_text: emit_graph_problem(problem),
        },
    })
}
