//! The graph-rewrite twin of Blocksworld.
//!
//! The table becomes a root node `R`, the gripper a transfer node `T` with
//! room for one outgoing edge, and `On(a, b)` the edge `n_b -> n_a`. Four
//! rewrite operations mirror the four actions one-to-one, so plans translate
//! in both directions and validity is preserved.

use std::collections::VecDeque;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::pddl::{Layout, ParseMode, PlanDoc, ProblemDoc};
use crate::state::{Action, BlockId, GoalAtom, GoalSpec, Predicate, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    Root,
    Transfer,
    Node(BlockId),
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Root => f.write_str("R"),
            NodeRef::Transfer => f.write_str("T"),
            NodeRef::Node(x) => write!(f, "n{}", x.index()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphOp {
    DetachNode { child: BlockId, parent: NodeRef },
    AttachNode { child: BlockId, target: NodeRef },
    AttachToRoot { child: BlockId },
    DetachFromRoot { child: BlockId },
}

impl GraphOp {
    pub fn name(&self) -> &'static str {
        match self {
            GraphOp::DetachNode { .. } => "DETACH_NODE",
            GraphOp::AttachNode { .. } => "ATTACH_NODE",
            GraphOp::AttachToRoot { .. } => "ATTACH_TO_ROOT",
            GraphOp::DetachFromRoot { .. } => "DETACH_FROM_ROOT",
        }
    }
}

impl fmt::Display for GraphOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |c: &BlockId| NodeRef::Node(*c);
        match self {
            GraphOp::DetachNode { child: c, parent: other }
            | GraphOp::AttachNode { child: c, target: other } => {
                write!(f, "{}({}, {})", self.name(), child(c), other)
            }
            GraphOp::AttachToRoot { child: c } | GraphOp::DetachFromRoot { child: c } => {
                write!(f, "{}({})", self.name(), child(c))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("{op}: precondition failed: {precondition}")]
    PreconditionFailed { op: GraphOp, precondition: &'static str },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown operation `{name}`")]
    UnknownOp { line: usize, name: String },
    #[error("line {line}: `{name}` takes {expected} argument(s), got {found}")]
    ArityMismatch { line: usize, name: String, expected: usize, found: usize },
    #[error("{0} has no Blocksworld counterpart")]
    Untranslatable(GraphOp),
}

/// Forest over `R` and `T`: every node has exactly one parent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GraphState {
    parent: Vec<NodeRef>,
    out_degree: Vec<u32>,
    transfer: Option<BlockId>,
}

impl GraphState {
    /// Builds a graph from an edge list, checking the forest invariants.
    pub fn from_edges(n_nodes: usize, edges: &[(NodeRef, BlockId)]) -> Result<GraphState, GraphError> {
        let mut parent: Vec<Option<NodeRef>> = vec![None; n_nodes];
        for &(p, c) in edges {
            if c.slot() >= n_nodes {
                return Err(GraphError::Invalid(format!("unknown node n{}", c.index())));
            }
            if let NodeRef::Node(x) = p {
                if x.slot() >= n_nodes {
                    return Err(GraphError::Invalid(format!("unknown node n{}", x.index())));
                }
            }
            if parent[c.slot()].replace(p).is_some() {
                return Err(GraphError::Invalid(format!("n{} has two parents", c.index())));
            }
        }
        let parent: Vec<NodeRef> = parent
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or_else(|| GraphError::Invalid(format!("n{} has no parent", i + 1))))
            .collect::<Result<_, _>>()?;
        let mut out_degree = vec![0u32; n_nodes];
        let mut transfer = None;
        for (i, p) in parent.iter().enumerate() {
            match p {
                NodeRef::Node(x) => out_degree[x.slot()] += 1,
                NodeRef::Transfer => {
                    if transfer.replace(BlockId::new(i as u32 + 1)).is_some() {
                        return Err(GraphError::Invalid("T has more than one outgoing edge".into()));
                    }
                }
                NodeRef::Root => {}
            }
        }
        // every node must reach R or T without looping
        for start in 0..n_nodes {
            let mut cur = parent[start];
            let mut steps = 0;
            while let NodeRef::Node(x) = cur {
                steps += 1;
                if steps > n_nodes {
                    return Err(GraphError::Invalid(format!("cycle through n{}", start + 1)));
                }
                cur = parent[x.slot()];
            }
        }
        Ok(GraphState { parent, out_degree, transfer })
    }

    pub fn n_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn parent_of(&self, x: BlockId) -> NodeRef {
        self.parent[x.slot()]
    }

    pub fn transfer(&self) -> Option<BlockId> {
        self.transfer
    }

    pub fn has_edge(&self, p: NodeRef, c: BlockId) -> bool {
        c.slot() < self.parent.len() && self.parent[c.slot()] == p
    }

    /// Out-degree zero. `R` is never a leaf; `T` is one when empty.
    pub fn is_leaf(&self, n: NodeRef) -> bool {
        match n {
            NodeRef::Root => false,
            NodeRef::Transfer => self.transfer.is_none(),
            NodeRef::Node(x) => x.slot() < self.parent.len() && self.out_degree[x.slot()] == 0,
        }
    }

    /// Edges sorted by (parent, child).
    pub fn edges(&self) -> Vec<(NodeRef, BlockId)> {
        let mut out: Vec<(NodeRef, BlockId)> = self
            .parent
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, BlockId::new(i as u32 + 1)))
            .collect();
        out.sort_unstable();
        out
    }

    /// Edges in breadth-first order from `R` (then `T`), children by
    /// ascending index.
    pub fn edges_breadth_first(&self) -> Vec<(NodeRef, BlockId)> {
        let mut children: Vec<Vec<BlockId>> = vec![Vec::new(); self.parent.len()];
        let mut root = Vec::new();
        for (i, &p) in self.parent.iter().enumerate() {
            let c = BlockId::new(i as u32 + 1);
            match p {
                NodeRef::Root => root.push(c),
                NodeRef::Node(x) => children[x.slot()].push(c),
                NodeRef::Transfer => {}
            }
        }
        let mut out = Vec::with_capacity(self.parent.len());
        let mut queue = VecDeque::new();
        for c in root {
            out.push((NodeRef::Root, c));
            queue.push_back(c);
        }
        if let Some(t) = self.transfer {
            out.push((NodeRef::Transfer, t));
            queue.push_back(t);
        }
        while let Some(x) = queue.pop_front() {
            for &c in &children[x.slot()] {
                out.push((NodeRef::Node(x), c));
                queue.push_back(c);
            }
        }
        out
    }

    fn set_parent(&mut self, child: BlockId, new_parent: NodeRef) {
        match self.parent[child.slot()] {
            NodeRef::Node(x) => self.out_degree[x.slot()] -= 1,
            NodeRef::Transfer => self.transfer = None,
            NodeRef::Root => {}
        }
        match new_parent {
            NodeRef::Node(x) => self.out_degree[x.slot()] += 1,
            NodeRef::Transfer => self.transfer = Some(child),
            NodeRef::Root => {}
        }
        self.parent[child.slot()] = new_parent;
    }

    /// Applies one rewrite rule; preconditions are checked in rule-card order.
    pub fn apply(&self, op: GraphOp) -> Result<GraphState, GraphError> {
        let fail = |precondition| Err(GraphError::PreconditionFailed { op, precondition });
        let known = |x: BlockId| x.slot() < self.parent.len();
        let mut next = self.clone();
        match op {
            GraphOp::DetachNode { child, parent } => {
                if !known(child) || !self.has_edge(parent, child) {
                    return fail("edge parent -> child exists");
                }
                if !self.is_leaf(NodeRef::Node(child)) {
                    return fail("child is a leaf");
                }
                if self.transfer.is_some() {
                    return fail("T is empty");
                }
                if parent == NodeRef::Root {
                    return fail("parent is not R");
                }
                next.set_parent(child, NodeRef::Transfer);
            }
            GraphOp::AttachNode { child, target } => {
                if !known(child) || self.transfer != Some(child) {
                    return fail("edge T -> child exists");
                }
                if !self.is_leaf(target) {
                    return fail("target is a leaf");
                }
                if target == NodeRef::Node(child) {
                    return fail("child != target");
                }
                if target == NodeRef::Root {
                    return fail("target is not R");
                }
                next.set_parent(child, target);
            }
            GraphOp::AttachToRoot { child } => {
                if !known(child) || self.transfer != Some(child) {
                    return fail("edge T -> child exists");
                }
                next.set_parent(child, NodeRef::Root);
            }
            GraphOp::DetachFromRoot { child } => {
                if !known(child) || !self.has_edge(NodeRef::Root, child) {
                    return fail("edge R -> child exists");
                }
                if !self.is_leaf(NodeRef::Node(child)) {
                    return fail("child is a leaf");
                }
                if self.transfer.is_some() {
                    return fail("T is empty");
                }
                next.set_parent(child, NodeRef::Transfer);
            }
        }
        Ok(next)
    }

    /// Goal atoms read as edges: `On(a, b)` is `n_b -> n_a`, `Holding(a)` is
    /// `T -> n_a`.
    pub fn satisfies(&self, goal: &[(NodeRef, BlockId)]) -> bool {
        goal.iter().all(|&(p, c)| self.has_edge(p, c))
    }
}

pub fn to_graph(state: &WorldState) -> GraphState {
    let mut edges = Vec::with_capacity(state.n_blocks());
    for tower in state.towers() {
        edges.push((NodeRef::Root, tower[0]));
        for w in tower.windows(2) {
            edges.push((NodeRef::Node(w[0]), w[1]));
        }
    }
    if let Some(h) = state.held() {
        edges.push((NodeRef::Transfer, h));
    }
    GraphState::from_edges(state.n_blocks(), &edges).expect("valid state maps to a valid graph")
}

pub fn from_graph(graph: &GraphState) -> WorldState {
    let mut towers = Vec::new();
    for (p, c) in graph.edges() {
        if p == NodeRef::Root {
            let mut tower = vec![c];
            let mut cur = c;
            while let Some(&(_, next)) = graph
                .edges()
                .iter()
                .find(|&&(pp, _)| pp == NodeRef::Node(cur))
            {
                tower.push(next);
                cur = next;
            }
            towers.push(tower);
        }
    }
    WorldState::new(towers, graph.transfer()).expect("valid graph maps to a valid state")
}

pub fn goal_edges(goal: &GoalSpec) -> Vec<(NodeRef, BlockId)> {
    goal.atoms()
        .into_iter()
        .map(|a| match a {
            GoalAtom::On { above, below } => (NodeRef::Node(below), above),
            GoalAtom::Holding(x) => (NodeRef::Transfer, x),
        })
        .collect()
}

pub fn translate_action(action: Action) -> GraphOp {
    match action {
        Action::Unstack(a, under) => GraphOp::DetachNode { child: a, parent: NodeRef::Node(under) },
        Action::PutDown(a) => GraphOp::AttachToRoot { child: a },
        Action::PickUp(a) => GraphOp::DetachFromRoot { child: a },
        Action::Stack(a, under) => GraphOp::AttachNode { child: a, target: NodeRef::Node(under) },
    }
}

pub fn translate_plan(plan: &PlanDoc) -> Vec<GraphOp> {
    plan.steps.iter().copied().map(translate_action).collect()
}

/// Inverse of [`translate_plan`]. Ops naming `R` or `T` where a block is
/// expected have no Blocksworld counterpart.
pub fn translate_graph_plan(ops: &[GraphOp]) -> Result<PlanDoc, GraphError> {
    ops.iter()
        .map(|&op| match op {
            GraphOp::DetachNode { child, parent: NodeRef::Node(p) } => Ok(Action::Unstack(child, p)),
            GraphOp::AttachNode { child, target: NodeRef::Node(t) } => Ok(Action::Stack(child, t)),
            GraphOp::AttachToRoot { child } => Ok(Action::PutDown(child)),
            GraphOp::DetachFromRoot { child } => Ok(Action::PickUp(child)),
            other => Err(GraphError::Untranslatable(other)),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(PlanDoc::new)
}

/// Runs `ops` from `init` and checks the goal edges.
pub fn validate_graph_plan(
    init: &GraphState,
    goal: &[(NodeRef, BlockId)],
    ops: &[GraphOp],
) -> Result<GraphState, (usize, Option<GraphError>)> {
    let mut g = init.clone();
    for (i, &op) in ops.iter().enumerate() {
        g = g.apply(op).map_err(|e| (i + 1, Some(e)))?;
    }
    if g.satisfies(goal) {
        Ok(g)
    } else {
        Err((ops.len(), None))
    }
}

// ---------------------------------------------------------------------------
// Text formats

pub const INIT_HEADER: &str = "### INITIAL GRAPH STATE ###";
pub const GOAL_HEADER: &str = "### GOAL GRAPH PATTERN ###";

/// Rule cards that open every graph prompt, verbatim.
pub const RULES_PREAMBLE: &str = "SYSTEM PROMPT: GRAPH REWRITE SOLVER

I. THE DOMAIN
You are a Graph Rewriting Engine. You operate on a directed graph
representing a hierarchical data structure.

Definitions:
Nodes ($V$):
R: The Root Node (Fixed anchor, infinite outgoing capacity).
T: The Transfer Node (Temporary buffer, capacity = 1 outgoing edge).

Edges ($E$):
Directed edge u -> v represents a parent-child link.
Leaf Node: A node x is a leaf if it has out-degree 0 (it has no children).

II. THE RULES (OPERATIONS)
You can only perform the following four atomic operations to modify the graph topology.

1. DETACH_NODE(child, parent)
Semantics: Detaches a leaf node from its current parent.
(Constraint: Do NOT use this to detach from the Root R).
Preconditions:
- Edge parent -> child exists.
- child is a Leaf (Out-degree = 0).
- T (Transfer Node) is empty (Out-degree = 0).
- parent is not R.
Effect: Delete edge parent -> child. Add edge T -> child.

2. ATTACH_NODE(child, target)
Semantics: Attaches the node currently in the Transfer Node to a new target leaf.
(Constraint: Do NOT use this to attach to the Root R).
Preconditions:
- Edge T -> child exists.
- target is a Leaf node (Out-degree = 0).
- child != target.
- target is not R.
Effect: Delete edge T -> child. Add edge target -> child.

3. ATTACH_TO_ROOT(child)
Semantics: Attaches the node currently in the Transfer Node to the Root R.
Preconditions:
- Edge T -> child exists.
Effect: Delete edge T -> child. Add edge R -> child.

4. DETACH_FROM_ROOT(child)
Semantics: Detaches a leaf node that is currently connected directly to the Root R.
Preconditions:
- Edge R -> child exists.
- child is a Leaf (Out-degree = 0).
- T (Transfer Node) is empty (Out-degree = 0).
Effect: Delete edge R -> child. Add edge T -> child.


";

/// One line of a graph problem's initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphFact {
    Edge(NodeRef, BlockId),
    Leaf(BlockId),
}

impl fmt::Display for GraphFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphFact::Edge(p, c) => write!(f, "{p} -> {}", NodeRef::Node(*c)),
            GraphFact::Leaf(x) => write!(f, "Leaf: {}", NodeRef::Node(*x)),
        }
    }
}

fn fact_of(p: &Predicate) -> Option<GraphFact> {
    match *p {
        Predicate::On { above, below } => Some(GraphFact::Edge(NodeRef::Node(below), above)),
        Predicate::OnTable(x) => Some(GraphFact::Edge(NodeRef::Root, x)),
        Predicate::Clear(x) => Some(GraphFact::Leaf(x)),
        Predicate::Holding(x) => Some(GraphFact::Edge(NodeRef::Transfer, x)),
        Predicate::HandEmpty => None,
    }
}

fn edge_line(p: NodeRef, c: BlockId) -> String {
    format!("{p} -> {}", NodeRef::Node(c))
}

/// Graph rendering of a problem, keeping the scrambled init order. The hand
/// fact is implicit (no `T` edge means an empty hand).
pub fn emit_graph_problem(problem: &ProblemDoc) -> String {
    let mut out = String::new();
    out.push_str(INIT_HEADER);
    out.push('\n');
    for fact in problem.init.iter().filter_map(fact_of) {
        out.push_str(&fact.to_string());
        out.push('\n');
    }
    out.push('\n');
    out.push_str(GOAL_HEADER);
    out.push('\n');
    for (p, c) in goal_edges(&problem.goal) {
        out.push_str(&edge_line(p, c));
        out.push('\n');
    }
    out
}

/// The plain edge listing used for the worked example inside a prompt:
/// breadth-first edges, then the goal pattern.
pub fn emit_graph_exemplar(problem: &ProblemDoc) -> Result<String, crate::state::StateError> {
    let graph = to_graph(&problem.initial_state()?);
    let mut out = String::from("INITIAL GRAPH STATE (Edges)\n");
    for (p, c) in graph.edges_breadth_first() {
        out.push_str(&edge_line(p, c));
        out.push('\n');
    }
    out.push_str("\nGOAL GRAPH PATTERN (Edges)\n");
    for (p, c) in goal_edges(&problem.goal) {
        out.push_str(&edge_line(p, c));
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphProblem {
    pub init: Vec<GraphFact>,
    pub goal: Vec<(NodeRef, BlockId)>,
}

impl GraphProblem {
    pub fn n_nodes(&self) -> usize {
        let init = self.init.iter().flat_map(|f| match *f {
            GraphFact::Edge(NodeRef::Node(p), c) => vec![p, c],
            GraphFact::Edge(_, c) | GraphFact::Leaf(c) => vec![c],
        });
        let goal = self.goal.iter().flat_map(|&(p, c)| match p {
            NodeRef::Node(p) => vec![p, c],
            _ => vec![c],
        });
        init.chain(goal).map(|x| x.index() as usize).max().unwrap_or(0)
    }

    /// Back to a Blocksworld problem. Objects are `b1..bN`; the hand fact is
    /// appended after the listed facts.
    pub fn to_problem_doc(&self, name: &str) -> Result<ProblemDoc, GraphError> {
        let n = self.n_nodes();
        let mut init: Vec<Predicate> = self
            .init
            .iter()
            .map(|f| match *f {
                GraphFact::Edge(NodeRef::Root, c) => Predicate::OnTable(c),
                GraphFact::Edge(NodeRef::Transfer, c) => Predicate::Holding(c),
                GraphFact::Edge(NodeRef::Node(p), c) => Predicate::On { above: c, below: p },
                GraphFact::Leaf(x) => Predicate::Clear(x),
            })
            .collect();
        if !init.iter().any(|p| matches!(p, Predicate::Holding(_))) {
            init.push(Predicate::HandEmpty);
        }
        let atoms = self
            .goal
            .iter()
            .map(|&(p, c)| match p {
                NodeRef::Node(below) => Ok(GoalAtom::On { above: c, below }),
                NodeRef::Transfer => Ok(GoalAtom::Holding(c)),
                NodeRef::Root => Err(GraphError::Invalid("goal edges from R are not supported".into())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        WorldState::from_predicates(&init, n).map_err(|e| GraphError::Invalid(e.to_string()))?;
        Ok(ProblemDoc {
            name: name.to_string(),
            objects: (1..=n as u32).map(BlockId::new).collect(),
            init,
            goal: GoalSpec::from_atoms(atoms),
            layout: Layout::Indented,
        })
    }
}

fn node_name(text: &str, allow_b: bool) -> Option<NodeRef> {
    match text {
        "R" => Some(NodeRef::Root),
        "T" => Some(NodeRef::Transfer),
        _ => {
            let digits = text.strip_prefix('n').or_else(|| if allow_b { text.strip_prefix('b') } else { None })?;
            if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|c| c.is_ascii_digit()) {
                return None;
            }
            digits.parse().ok().and_then(BlockId::try_new).map(NodeRef::Node)
        }
    }
}

fn parse_edge(line_no: usize, line: &str) -> Result<(NodeRef, BlockId), GraphError> {
    let syntax = |m: &str| GraphError::Syntax { line: line_no, message: m.to_string() };
    let (p, c) = line.split_once("->").ok_or_else(|| syntax("expected `u -> v`"))?;
    let p = node_name(p.trim(), false).ok_or_else(|| syntax("bad parent node"))?;
    match node_name(c.trim(), false) {
        Some(NodeRef::Node(c)) => Ok((p, c)),
        _ => Err(syntax("edge must end at a numbered node")),
    }
}

pub fn parse_graph_problem(text: &str) -> Result<GraphProblem, GraphError> {
    #[derive(PartialEq)]
    enum Section {
        Before,
        Init,
        Goal,
    }
    let mut section = Section::Before;
    let mut init = Vec::new();
    let mut goal = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line == INIT_HEADER {
            section = Section::Init;
            continue;
        }
        if line == GOAL_HEADER {
            section = Section::Goal;
            continue;
        }
        if line.is_empty() || section == Section::Before {
            continue;
        }
        match section {
            Section::Init => {
                if let Some(rest) = line.strip_prefix("Leaf:") {
                    match node_name(rest.trim(), false) {
                        Some(NodeRef::Node(x)) => init.push(GraphFact::Leaf(x)),
                        _ => {
                            return Err(GraphError::Syntax { line: line_no, message: "bad leaf node".into() })
                        }
                    }
                } else {
                    let (p, c) = parse_edge(line_no, line)?;
                    init.push(GraphFact::Edge(p, c));
                }
            }
            Section::Goal => goal.push(parse_edge(line_no, line)?),
            Section::Before => unreachable!(),
        }
    }
    if section == Section::Before {
        return Err(GraphError::Syntax { line: 1, message: format!("missing `{INIT_HEADER}`") });
    }
    Ok(GraphProblem { init, goal })
}

pub fn emit_graph_plan(ops: &[GraphOp]) -> String {
    ops.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

fn op_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\b(DETACH_NODE|ATTACH_NODE|ATTACH_TO_ROOT|DETACH_FROM_ROOT)\s*\(([^()]*)\)")
            .expect("valid regex")
    })
}

fn build_op(line_no: usize, name: &str, args: &str, allow_b: bool) -> Result<GraphOp, GraphError> {
    let expected = match name {
        "DETACH_NODE" | "ATTACH_NODE" => 2,
        "ATTACH_TO_ROOT" | "DETACH_FROM_ROOT" => 1,
        _ => return Err(GraphError::UnknownOp { line: line_no, name: name.to_string() }),
    };
    let parts: Vec<&str> = if args.trim().is_empty() {
        Vec::new()
    } else {
        args.split(',').map(str::trim).collect()
    };
    if parts.len() != expected {
        return Err(GraphError::ArityMismatch {
            line: line_no,
            name: name.to_string(),
            expected,
            found: parts.len(),
        });
    }
    let syntax = |m: String| GraphError::Syntax { line: line_no, message: m };
    let nodes = parts
        .iter()
        .map(|p| node_name(p, allow_b).ok_or_else(|| syntax(format!("bad node `{p}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let NodeRef::Node(child) = nodes[0] else {
        return Err(syntax("child must be a numbered node".into()));
    };
    Ok(match name {
        "DETACH_NODE" => GraphOp::DetachNode { child, parent: nodes[1] },
        "ATTACH_NODE" => GraphOp::AttachNode { child, target: nodes[1] },
        "ATTACH_TO_ROOT" => GraphOp::AttachToRoot { child },
        _ => GraphOp::DetachFromRoot { child },
    })
}

/// Parses `OPNAME(arg[, arg])` lines. Lenient mode drops noise lines and
/// accepts `b<k>` for `n<k>`.
pub fn parse_graph_plan(text: &str, mode: ParseMode) -> Result<Vec<GraphOp>, GraphError> {
    let mut ops = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        match mode {
            ParseMode::Strict => {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let syntax = || GraphError::Syntax { line: line_no, message: "expected `OP(args)`".into() };
                let (name, rest) = line.split_once('(').ok_or_else(syntax)?;
                let args = rest.strip_suffix(')').ok_or_else(syntax)?;
                if args.contains(['(', ')']) {
                    return Err(syntax());
                }
                let name = name.trim();
                if name.is_empty() || !name.bytes().all(|c| c.is_ascii_uppercase() || c == b'_') {
                    return Err(syntax());
                }
                ops.push(build_op(line_no, name, args, false)?);
            }
            ParseMode::Lenient => {
                if line.trim_start().starts_with("```") {
                    continue;
                }
                for cap in op_regex().captures_iter(line) {
                    ops.push(build_op(line_no, &cap[1], &cap[2], true)?);
                }
            }
        }
    }
    Ok(ops)
}

pub fn parse_graph_plan_any(text: &str) -> Result<(Vec<GraphOp>, ParseMode), GraphError> {
    match parse_graph_plan(text, ParseMode::Strict) {
        Ok(ops) => Ok((ops, ParseMode::Strict)),
        Err(_) => parse_graph_plan(text, ParseMode::Lenient).map(|ops| (ops, ParseMode::Lenient)),
    }
}
