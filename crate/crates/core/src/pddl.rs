//! Problem and plan texts for `blocksworld-4ops`.
//!
//! Emission is byte-exact: a parsed problem re-emits to the text it came
//! from, including the scrambled `:init` order and one of the two layouts
//! seen in practice (see [`Layout`]).

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::state::{Action, BlockId, GoalAtom, GoalSpec, Predicate, StateError, WorldState};

pub const DOMAIN_NAME: &str = "blocksworld-4ops";

/// The domain definition, verbatim.
pub const DOMAIN_PDDL: &str = "(define (domain blocksworld-4ops)
  (:requirements :strips)
(:predicates (clear ?x)
             (ontable ?x)
             (handempty)
             (holding ?x)
             (on ?x ?y))

(:action pick-up
  :parameters (?ob)
  :precondition (and (clear ?ob) (ontable ?ob) (handempty))
  :effect (and (holding ?ob) (not (clear ?ob)) (not (ontable ?ob))
               (not (handempty))))

(:action put-down
  :parameters  (?ob)
  :precondition (holding ?ob)
  :effect (and (clear ?ob) (handempty) (ontable ?ob)
               (not (holding ?ob))))

(:action stack
  :parameters  (?ob ?underob)
  :precondition (and (clear ?underob) (holding ?ob))
  :effect (and (handempty) (clear ?ob) (on ?ob ?underob)
               (not (clear ?underob)) (not (holding ?ob))))

(:action unstack
  :parameters  (?ob ?underob)
  :precondition (and (on ?ob ?underob) (clear ?ob) (handempty))
  :effect (and (holding ?ob) (clear ?underob)
               (not (on ?ob ?underob)) (not (clear ?ob)) (not (handempty)))))
";

/// Whitespace layout of a problem file.
///
/// `Compact` puts every section keyword at column 0 with objects on one line;
/// `Indented` nests sections by two spaces and lists objects on their own
/// line. Generated problems use `Indented`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Layout {
    Compact,
    #[default]
    Indented,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProblemDoc {
    pub name: String,
    pub objects: Vec<BlockId>,
    pub init: Vec<Predicate>,
    pub goal: GoalSpec,
    pub layout: Layout,
}

impl ProblemDoc {
    pub fn n_blocks(&self) -> usize {
        self.objects.len()
    }

    pub fn initial_state(&self) -> Result<WorldState, StateError> {
        WorldState::from_predicates(&self.init, self.objects.len())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PlanDoc {
    pub steps: Vec<Action>,
}

impl PlanDoc {
    pub fn new(steps: Vec<Action>) -> Self {
        PlanDoc { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("object `{0}` is not declared")]
    UndeclaredObject(String),
    #[error("invalid objects: {0}")]
    InvalidObjects(String),
    #[error("unsupported domain `{0}`")]
    UnknownDomain(String),
    #[error("inconsistent init: {0}")]
    InconsistentInit(#[from] StateError),
    #[error("goal has no conjuncts; refusing to emit a degenerate goal")]
    DegenerateGoal,
    #[error("plan line {line}: {message}")]
    PlanSyntax { line: usize, message: String },
    #[error("plan line {line}: `{action}` takes {expected} argument(s), got {found}")]
    ArityMismatch { line: usize, action: String, expected: usize, found: usize },
}

// ---------------------------------------------------------------------------
// Emission

pub fn emit_problem(doc: &ProblemDoc) -> Result<String, PddlError> {
    let atoms = doc.goal.atoms();
    if atoms.is_empty() {
        return Err(PddlError::DegenerateGoal);
    }
    let objects = doc.objects.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    out.push_str(&format!("(define (problem {})\n", doc.name));
    out.push_str(&format!("(:domain {DOMAIN_NAME})\n"));
    match doc.layout {
        Layout::Compact => {
            out.push_str(&format!("(:objects {objects})\n"));
            out.push_str("(:init\n");
            for p in &doc.init {
                out.push_str(&format!("{p}\n"));
            }
            out.push_str(")\n(:goal (and\n");
            for a in &atoms {
                out.push_str(&format!("{a}\n"));
            }
            out.push_str("))\n)\n");
        }
        Layout::Indented => {
            out.push_str(&format!("  (:objects\n    {objects}\n  )\n"));
            out.push_str("  (:init\n");
            for p in &doc.init {
                out.push_str(&format!("{p}\n"));
            }
            out.push_str("  )\n  (:goal\n    (and\n");
            for a in &atoms {
                out.push_str(&format!("      {a}\n"));
            }
            out.push_str("    )\n  )\n)\n");
        }
    }
    Ok(out)
}

/// One action per line, no trailing newline.
pub fn emit_plan(plan: &PlanDoc) -> String {
    plan.steps.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

// ---------------------------------------------------------------------------
// S-expressions

#[derive(Debug, Clone)]
enum Sexp {
    Atom { text: String, line: usize, column: usize },
    List { items: Vec<Sexp>, line: usize, column: usize },
}

impl Sexp {
    fn pos(&self) -> (usize, usize) {
        match self {
            Sexp::Atom { line, column, .. } | Sexp::List { line, column, .. } => (*line, *column),
        }
    }

    fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom { text, .. } => Some(text),
            Sexp::List { .. } => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List { items, .. } => Some(items),
            Sexp::Atom { .. } => None,
        }
    }
}

fn syntax_at(pos: (usize, usize), message: impl Into<String>) -> PddlError {
    PddlError::Syntax { line: pos.0, column: pos.1, message: message.into() }
}

fn parse_sexp(text: &str) -> Result<Sexp, PddlError> {
    let mut stack: Vec<(Vec<Sexp>, usize, usize)> = Vec::new();
    let mut result: Option<Sexp> = None;
    let mut line = 1;
    let mut column = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        column += 1;
        match c {
            '\n' => {
                line += 1;
                column = 0;
            }
            ';' => {
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            c if c.is_whitespace() => {}
            '(' => {
                if result.is_some() {
                    return Err(syntax_at((line, column), "trailing content after problem"));
                }
                stack.push((Vec::new(), line, column));
            }
            ')' => {
                let (items, l, col) =
                    stack.pop().ok_or_else(|| syntax_at((line, column), "unbalanced `)`"))?;
                let node = Sexp::List { items, line: l, column: col };
                match stack.last_mut() {
                    Some(parent) => parent.0.push(node),
                    None => result = Some(node),
                }
            }
            _ => {
                let start = i;
                let (l, col) = (line, column);
                let mut end = i + c.len_utf8();
                while let Some(&(j, c)) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    end = j + c.len_utf8();
                    column += 1;
                    chars.next();
                }
                let node = Sexp::Atom { text: text[start..end].to_string(), line: l, column: col };
                match stack.last_mut() {
                    Some(parent) => parent.0.push(node),
                    None => return Err(syntax_at((l, col), "expected `(`")),
                }
            }
        }
    }
    if let Some((_, l, col)) = stack.last() {
        return Err(syntax_at((*l, *col), "unclosed `(`"));
    }
    result.ok_or_else(|| syntax_at((line, column), "empty input"))
}

// ---------------------------------------------------------------------------
// Problem parsing

fn block_name(name: &str) -> Option<BlockId> {
    let digits = name.strip_prefix('b')?;
    if digits.is_empty() || !digits.bytes().all(|c| c.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    digits.parse().ok().and_then(BlockId::try_new)
}

struct Objects {
    declared: BTreeSet<BlockId>,
}

impl Objects {
    fn resolve(&self, node: &Sexp) -> Result<BlockId, PddlError> {
        let name = node.atom().ok_or_else(|| syntax_at(node.pos(), "expected an object name"))?;
        block_name(name)
            .filter(|x| self.declared.contains(x))
            .ok_or_else(|| PddlError::UndeclaredObject(name.to_string()))
    }
}

fn parse_fact(node: &Sexp, objects: &Objects) -> Result<Predicate, PddlError> {
    let items = node.list().ok_or_else(|| syntax_at(node.pos(), "expected a predicate"))?;
    let head = items
        .first()
        .and_then(Sexp::atom)
        .ok_or_else(|| syntax_at(node.pos(), "predicate without a name"))?;
    let args = &items[1..];
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(syntax_at(node.pos(), format!("`{head}` takes {n} argument(s)")))
        }
    };
    Ok(match head {
        "on" => {
            arity(2)?;
            Predicate::On { above: objects.resolve(&args[0])?, below: objects.resolve(&args[1])? }
        }
        "ontable" => {
            arity(1)?;
            Predicate::OnTable(objects.resolve(&args[0])?)
        }
        "clear" => {
            arity(1)?;
            Predicate::Clear(objects.resolve(&args[0])?)
        }
        "holding" => {
            arity(1)?;
            Predicate::Holding(objects.resolve(&args[0])?)
        }
        "handempty" => {
            arity(0)?;
            Predicate::HandEmpty
        }
        other => return Err(PddlError::UnknownPredicate(other.to_string())),
    })
}

fn parse_goal(node: &Sexp, objects: &Objects) -> Result<GoalSpec, PddlError> {
    let items = node.list().ok_or_else(|| syntax_at(node.pos(), "expected a goal formula"))?;
    let conjuncts: Vec<&Sexp> = if items.first().and_then(Sexp::atom) == Some("and") {
        items[1..].iter().collect()
    } else {
        vec![node]
    };
    let mut atoms = Vec::with_capacity(conjuncts.len());
    for c in conjuncts {
        atoms.push(match parse_fact(c, objects)? {
            Predicate::On { above, below } => GoalAtom::On { above, below },
            Predicate::Holding(x) => GoalAtom::Holding(x),
            other => {
                return Err(syntax_at(c.pos(), format!("unsupported goal fact {other}")));
            }
        });
    }
    Ok(GoalSpec::from_atoms(atoms))
}

fn detect_layout(text: &str) -> Layout {
    match text.find("(:objects") {
        Some(at) => {
            let line_start = text[..at].rfind('\n').map_or(0, |i| i + 1);
            if text[line_start..at].chars().all(|c| c == ' ' || c == '\t') && at > line_start {
                Layout::Indented
            } else {
                Layout::Compact
            }
        }
        None => Layout::Indented,
    }
}

pub fn parse_problem(text: &str) -> Result<ProblemDoc, PddlError> {
    let root = parse_sexp(text)?;
    let items = root.list().expect("root is a list");
    if items.first().and_then(Sexp::atom) != Some("define") {
        return Err(syntax_at(root.pos(), "expected `(define ...)`"));
    }
    let header = items
        .get(1)
        .and_then(Sexp::list)
        .ok_or_else(|| syntax_at(root.pos(), "expected `(problem <name>)`"))?;
    let name = match header {
        [kw, name] if kw.atom() == Some("problem") => name
            .atom()
            .ok_or_else(|| syntax_at(name.pos(), "problem name must be a symbol"))?
            .to_string(),
        _ => return Err(syntax_at(items[1].pos(), "expected `(problem <name>)`")),
    };

    let mut domain = None;
    let mut object_nodes = None;
    let mut init_nodes = None;
    let mut goal_node = None;
    for section in &items[2..] {
        let parts = section.list().ok_or_else(|| syntax_at(section.pos(), "expected a section"))?;
        let key = parts.first().and_then(Sexp::atom).unwrap_or("");
        match key {
            ":domain" => {
                domain = parts.get(1).and_then(Sexp::atom).map(str::to_string);
            }
            ":objects" => object_nodes = Some(&parts[1..]),
            ":init" => init_nodes = Some(&parts[1..]),
            ":goal" => {
                if parts.len() != 2 {
                    return Err(syntax_at(section.pos(), "`:goal` takes one formula"));
                }
                goal_node = Some(&parts[1]);
            }
            other => return Err(syntax_at(section.pos(), format!("unexpected section `{other}`"))),
        }
    }

    match domain.as_deref() {
        Some(DOMAIN_NAME) => {}
        Some(other) => return Err(PddlError::UnknownDomain(other.to_string())),
        None => return Err(syntax_at(root.pos(), "missing `:domain`")),
    }
    let object_nodes = object_nodes.ok_or_else(|| syntax_at(root.pos(), "missing `:objects`"))?;
    let init_nodes = init_nodes.ok_or_else(|| syntax_at(root.pos(), "missing `:init`"))?;
    let goal_node = goal_node.ok_or_else(|| syntax_at(root.pos(), "missing `:goal`"))?;

    let mut objects = Vec::with_capacity(object_nodes.len());
    for node in object_nodes {
        let text = node.atom().ok_or_else(|| syntax_at(node.pos(), "expected an object name"))?;
        let x = block_name(text)
            .ok_or_else(|| PddlError::InvalidObjects(format!("`{text}` is not of the form b<k>")))?;
        objects.push(x);
    }
    let declared: BTreeSet<BlockId> = objects.iter().copied().collect();
    if declared.len() != objects.len() {
        return Err(PddlError::InvalidObjects("duplicate object".into()));
    }
    if declared.last().map_or(0, |x| x.index() as usize) != objects.len() {
        return Err(PddlError::InvalidObjects("objects must be exactly b1..bN".into()));
    }
    let scope = Objects { declared };

    let init = init_nodes
        .iter()
        .map(|n| parse_fact(n, &scope))
        .collect::<Result<Vec<_>, _>>()?;
    let goal = parse_goal(goal_node, &scope)?;
    WorldState::from_predicates(&init, objects.len())?;

    Ok(ProblemDoc { name, objects, init, goal, layout: detect_layout(text) })
}

// ---------------------------------------------------------------------------
// Plan parsing

fn plan_action_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\(\s*(pick-up|put-down|stack|unstack)((?:\s+[^\s()]+)*)\s*\)").expect("valid regex")
    })
}

fn parse_action_line(line_no: usize, line: &str) -> Result<Action, PddlError> {
    let err = |message: &str| PddlError::PlanSyntax { line: line_no, message: message.to_string() };
    let inner = line
        .trim()
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| err("expected `(<action> <args>)`"))?;
    if inner.contains(['(', ')']) {
        return Err(err("nested parentheses"));
    }
    let mut words = inner.split_whitespace();
    let name = words.next().ok_or_else(|| err("empty action"))?;
    let args: Vec<&str> = words.collect();
    let expected = match name {
        "pick-up" | "put-down" => 1,
        "stack" | "unstack" => 2,
        _ => return Err(err(&format!("unknown action `{name}`"))),
    };
    if args.len() != expected {
        return Err(PddlError::ArityMismatch {
            line: line_no,
            action: name.to_string(),
            expected,
            found: args.len(),
        });
    }
    let blocks = args
        .iter()
        .map(|a| block_name(a).ok_or_else(|| err(&format!("`{a}` is not a block name"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match name {
        "pick-up" => Action::PickUp(blocks[0]),
        "put-down" => Action::PutDown(blocks[0]),
        "stack" => Action::Stack(blocks[0], blocks[1]),
        _ => Action::Unstack(blocks[0], blocks[1]),
    })
}

/// Parses plan text. Strict mode wants one `(action args)` per non-blank
/// line. Lenient mode first discards code fences, list markers and any line
/// without a parenthesized action, then parses what is left strictly.
pub fn parse_plan(text: &str, mode: ParseMode) -> Result<PlanDoc, PddlError> {
    let mut steps = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        match mode {
            ParseMode::Strict => {
                if line.trim().is_empty() {
                    continue;
                }
                steps.push(parse_action_line(line_no, line)?);
            }
            ParseMode::Lenient => {
                if line.trim_start().starts_with("```") {
                    continue;
                }
                for m in plan_action_regex().find_iter(line) {
                    steps.push(parse_action_line(line_no, m.as_str())?);
                }
            }
        }
    }
    Ok(PlanDoc { steps })
}

/// Tries strict parsing first and falls back to lenient; reports which one
/// succeeded.
pub fn parse_plan_any(text: &str) -> Result<(PlanDoc, ParseMode), PddlError> {
    match parse_plan(text, ParseMode::Strict) {
        Ok(plan) => Ok((plan, ParseMode::Strict)),
        Err(_) => parse_plan(text, ParseMode::Lenient).map(|p| (p, ParseMode::Lenient)),
    }
}
