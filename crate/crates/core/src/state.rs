//! Executable semantics of the four-operator Blocksworld.
//!
//! A [`WorldState`] is the structural form (towers plus an optional held
//! block); a list of [`Predicate`]s is the relational form used by problem
//! files. Both directions are total on valid inputs and checked on invalid
//! ones.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

/// A block, numbered from 1. Rendered `b<k>` in PDDL and `n<k>` in graph form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(u32);

impl BlockId {
    /// Panics on zero; block numbering starts at 1.
    pub fn new(index: u32) -> Self {
        assert!(index >= 1, "block indices start at 1");
        BlockId(index)
    }

    pub fn try_new(index: u32) -> Option<Self> {
        (index >= 1).then_some(BlockId(index))
    }

    pub fn index(self) -> u32 {
        self.0
    }

    /// Zero-based slot, handy for dense per-block tables.
    pub fn slot(self) -> usize {
        (self.0 - 1) as usize
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

/// Shorthand used throughout the tests.
pub fn b(index: u32) -> BlockId {
    BlockId::new(index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    On { above: BlockId, below: BlockId },
    OnTable(BlockId),
    Clear(BlockId),
    HandEmpty,
    Holding(BlockId),
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::On { above, below } => write!(f, "(on {above} {below})"),
            Predicate::OnTable(x) => write!(f, "(ontable {x})"),
            Predicate::Clear(x) => write!(f, "(clear {x})"),
            Predicate::HandEmpty => write!(f, "(handempty)"),
            Predicate::Holding(x) => write!(f, "(holding {x})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    PickUp(BlockId),
    PutDown(BlockId),
    Stack(BlockId, BlockId),
    Unstack(BlockId, BlockId),
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::PickUp(_) => "pick-up",
            Action::PutDown(_) => "put-down",
            Action::Stack(..) => "stack",
            Action::Unstack(..) => "unstack",
        }
    }

    /// Grasping actions leave the hand full.
    pub fn is_grasp(&self) -> bool {
        matches!(self, Action::PickUp(_) | Action::Unstack(..))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::PickUp(x) | Action::PutDown(x) => write!(f, "({} {x})", self.name()),
            Action::Stack(x, y) | Action::Unstack(x, y) => {
                write!(f, "({} {x} {y})", self.name())
            }
        }
    }
}

/// One conjunct of a goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GoalAtom {
    On { above: BlockId, below: BlockId },
    Holding(BlockId),
}

impl fmt::Display for GoalAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalAtom::On { above, below } => write!(f, "(on {above} {below})"),
            GoalAtom::Holding(x) => write!(f, "(holding {x})"),
        }
    }
}

/// Goal of a problem.
///
/// `Chain` lists a goal tower bottom to top and stands for the conjunction
/// `On(t[i+1], t[i])`. `Retrieve` stands for `Holding(t)`. Anything else read
/// from a file (for instance two disjoint towers) is kept verbatim as a
/// `Conjunction`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GoalSpec {
    Chain(Vec<BlockId>),
    Retrieve(BlockId),
    Conjunction(Vec<GoalAtom>),
}

impl GoalSpec {
    pub fn atoms(&self) -> Vec<GoalAtom> {
        match self {
            GoalSpec::Chain(targets) => targets
                .windows(2)
                .map(|w| GoalAtom::On { above: w[1], below: w[0] })
                .collect(),
            GoalSpec::Retrieve(t) => vec![GoalAtom::Holding(*t)],
            GoalSpec::Conjunction(atoms) => atoms.clone(),
        }
    }

    /// Picks the most specific variant for an ordered atom list: a single
    /// `holding` is a retrieve goal, `on` atoms that link bottom-up into one
    /// tower of distinct blocks form a chain.
    pub fn from_atoms(atoms: Vec<GoalAtom>) -> GoalSpec {
        if let [GoalAtom::Holding(t)] = atoms.as_slice() {
            return GoalSpec::Retrieve(*t);
        }
        let mut chain: Vec<BlockId> = Vec::with_capacity(atoms.len() + 1);
        for atom in &atoms {
            match *atom {
                GoalAtom::On { above, below } => {
                    if chain.is_empty() {
                        chain.push(below);
                    } else if chain.last() != Some(&below) {
                        return GoalSpec::Conjunction(atoms);
                    }
                    chain.push(above);
                }
                GoalAtom::Holding(_) => return GoalSpec::Conjunction(atoms),
            }
        }
        let distinct: BTreeSet<_> = chain.iter().collect();
        if chain.len() < 2 || distinct.len() != chain.len() {
            return GoalSpec::Conjunction(atoms);
        }
        GoalSpec::Chain(chain)
    }

    pub fn blocks(&self) -> Vec<BlockId> {
        match self {
            GoalSpec::Chain(targets) => targets.clone(),
            GoalSpec::Retrieve(t) => vec![*t],
            GoalSpec::Conjunction(atoms) => {
                let mut out = Vec::new();
                for atom in atoms {
                    match *atom {
                        GoalAtom::On { above, below } => {
                            out.push(above);
                            out.push(below);
                        }
                        GoalAtom::Holding(x) => out.push(x),
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("block {0} has no support fact (on/ontable/holding)")]
    MissingPredicate(BlockId),
    #[error("on-chain through {0} forms a cycle")]
    Cycle(BlockId),
    #[error("conflicting facts about {block}: {detail}")]
    Conflict { block: BlockId, detail: String },
    #[error("hand state must be exactly one of handempty / holding: {0}")]
    BadHand(String),
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("block {0} is held, not in a tower")]
    BlockHeld(BlockId),
    #[error("{action}: precondition {missing} does not hold")]
    PreconditionFailed { action: Action, missing: Predicate },
}

/// Where a block currently sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Tower { tower: usize, height: usize },
    Held,
}

/// Towers listed bottom to top plus the held block.
///
/// Equality and hashing ignore tower order: two states with the same stacks
/// in a different listing order are the same state.
#[derive(Debug, Clone)]
pub struct WorldState {
    towers: Vec<Vec<BlockId>>,
    held: Option<BlockId>,
}

impl WorldState {
    /// Builds a state from explicit towers, checking that blocks `1..=n`
    /// each appear exactly once.
    pub fn new(towers: Vec<Vec<BlockId>>, held: Option<BlockId>) -> Result<Self, StateError> {
        let towers: Vec<Vec<BlockId>> = towers.into_iter().filter(|t| !t.is_empty()).collect();
        let n = towers.iter().map(Vec::len).sum::<usize>() + usize::from(held.is_some());
        let mut seen = vec![false; n];
        for x in towers.iter().flatten().chain(held.iter()) {
            let slot = x.slot();
            if slot >= n {
                return Err(StateError::UnknownBlock(*x));
            }
            if std::mem::replace(&mut seen[slot], true) {
                return Err(StateError::Conflict {
                    block: *x,
                    detail: "appears more than once".into(),
                });
            }
        }
        Ok(WorldState { towers, held })
    }

    /// Convenience constructor from raw indices; panics on invalid input.
    pub fn from_indices(towers: &[&[u32]], held: Option<u32>) -> Self {
        let towers = towers
            .iter()
            .map(|t| t.iter().copied().map(BlockId::new).collect())
            .collect();
        WorldState::new(towers, held.map(BlockId::new)).expect("valid state")
    }

    pub fn towers(&self) -> &[Vec<BlockId>] {
        &self.towers
    }

    pub fn held(&self) -> Option<BlockId> {
        self.held
    }

    pub fn hand_empty(&self) -> bool {
        self.held.is_none()
    }

    pub fn n_blocks(&self) -> usize {
        self.towers.iter().map(Vec::len).sum::<usize>() + usize::from(self.held.is_some())
    }

    pub fn contains(&self, x: BlockId) -> bool {
        x.slot() < self.n_blocks()
    }

    pub fn locate(&self, x: BlockId) -> Option<Location> {
        if self.held == Some(x) {
            return Some(Location::Held);
        }
        self.towers.iter().enumerate().find_map(|(tower, stack)| {
            stack
                .iter()
                .position(|&y| y == x)
                .map(|height| Location::Tower { tower, height })
        })
    }

    pub fn is_clear(&self, x: BlockId) -> bool {
        self.towers.iter().any(|t| t.last() == Some(&x))
    }

    pub fn is_on_table(&self, x: BlockId) -> bool {
        self.towers.iter().any(|t| t.first() == Some(&x))
    }

    pub fn is_on(&self, above: BlockId, below: BlockId) -> bool {
        self.towers
            .iter()
            .any(|t| t.windows(2).any(|w| w[0] == below && w[1] == above))
    }

    /// Number of blocks strictly above `x` in its tower.
    pub fn depth(&self, x: BlockId) -> Result<usize, StateError> {
        if !self.contains(x) {
            return Err(StateError::UnknownBlock(x));
        }
        match self.locate(x) {
            Some(Location::Tower { tower, height }) => Ok(self.towers[tower].len() - height - 1),
            Some(Location::Held) => Err(StateError::BlockHeld(x)),
            None => Err(StateError::UnknownBlock(x)),
        }
    }

    /// The blocks covering `x`, top first.
    pub fn blocks_above(&self, x: BlockId) -> Result<Vec<BlockId>, StateError> {
        match self.locate(x) {
            Some(Location::Tower { tower, height }) => {
                Ok(self.towers[tower][height + 1..].iter().rev().copied().collect())
            }
            Some(Location::Held) => Err(StateError::BlockHeld(x)),
            None => Err(StateError::UnknownBlock(x)),
        }
    }

    /// Tower contents sorted by bottom block: the key used for equality.
    pub fn canonical(&self) -> (Vec<Vec<BlockId>>, Option<BlockId>) {
        let mut towers = self.towers.clone();
        towers.sort_unstable_by_key(|t| t[0]);
        (towers, self.held)
    }

    /// Successor state; the receiver is left untouched.
    pub fn apply(&self, action: Action) -> Result<WorldState, StateError> {
        let mut next = self.clone();
        next.apply_mut(action)?;
        Ok(next)
    }

    /// In-place [`WorldState::apply`]. All preconditions are checked before
    /// anything changes, so a failed action leaves the state as it was.
    pub fn apply_mut(&mut self, action: Action) -> Result<(), StateError> {
        let fail = |missing| Err(StateError::PreconditionFailed { action, missing });
        match action {
            Action::PickUp(x) => {
                if !self.is_clear(x) {
                    return fail(Predicate::Clear(x));
                }
                if !self.is_on_table(x) {
                    return fail(Predicate::OnTable(x));
                }
                if self.held.is_some() {
                    return fail(Predicate::HandEmpty);
                }
                let idx = self.tower_with_top(x).expect("clear block has a tower");
                self.towers.remove(idx);
                self.held = Some(x);
            }
            Action::PutDown(x) => {
                if self.held != Some(x) {
                    return fail(Predicate::Holding(x));
                }
                self.held = None;
                self.towers.push(vec![x]);
            }
            Action::Stack(x, under) => {
                if x == under || !self.is_clear(under) {
                    return fail(Predicate::Clear(under));
                }
                if self.held != Some(x) {
                    return fail(Predicate::Holding(x));
                }
                let idx = self.tower_with_top(under).expect("clear block has a tower");
                self.towers[idx].push(x);
                self.held = None;
            }
            Action::Unstack(x, under) => {
                if !self.is_on(x, under) {
                    return fail(Predicate::On { above: x, below: under });
                }
                if !self.is_clear(x) {
                    return fail(Predicate::Clear(x));
                }
                if self.held.is_some() {
                    return fail(Predicate::HandEmpty);
                }
                let idx = self.tower_with_top(x).expect("clear block has a tower");
                self.towers[idx].pop();
                self.held = Some(x);
            }
        }
        Ok(())
    }

    fn tower_with_top(&self, x: BlockId) -> Option<usize> {
        self.towers.iter().position(|t| t.last() == Some(&x))
    }

    /// All applicable actions in canonical order: pick-up < put-down < stack
    /// < unstack, then ascending block indices.
    pub fn applicable_actions(&self) -> Vec<Action> {
        let mut out = Vec::new();
        match self.held {
            None => {
                for t in &self.towers {
                    if t.len() == 1 {
                        out.push(Action::PickUp(t[0]));
                    } else {
                        out.push(Action::Unstack(t[t.len() - 1], t[t.len() - 2]));
                    }
                }
            }
            Some(h) => {
                out.push(Action::PutDown(h));
                for t in &self.towers {
                    out.push(Action::Stack(h, *t.last().expect("towers are nonempty")));
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn satisfies(&self, goal: &GoalSpec) -> Result<bool, StateError> {
        for x in goal.blocks() {
            if !self.contains(x) {
                return Err(StateError::UnknownBlock(x));
            }
        }
        Ok(goal.atoms().iter().all(|atom| match *atom {
            GoalAtom::On { above, below } => self.is_on(above, below),
            GoalAtom::Holding(x) => self.held == Some(x),
        }))
    }

    /// Full relational rendering in canonical order: `on` by ascending upper
    /// block, then `ontable`, then `clear`, then the hand fact.
    pub fn to_predicates(&self) -> Vec<Predicate> {
        let mut on = Vec::new();
        let mut table = Vec::new();
        let mut clear = Vec::new();
        for t in &self.towers {
            table.push(t[0]);
            clear.push(t[t.len() - 1]);
            for w in t.windows(2) {
                on.push((w[1], w[0]));
            }
        }
        on.sort_unstable();
        table.sort_unstable();
        clear.sort_unstable();
        let mut out: Vec<Predicate> = on
            .into_iter()
            .map(|(above, below)| Predicate::On { above, below })
            .collect();
        out.extend(table.into_iter().map(Predicate::OnTable));
        out.extend(clear.into_iter().map(Predicate::Clear));
        out.push(match self.held {
            Some(x) => Predicate::Holding(x),
            None => Predicate::HandEmpty,
        });
        out
    }

    /// Rebuilds the unique state whose relational form equals `preds` as a
    /// set. Order and duplicates in `preds` do not matter.
    pub fn from_predicates(preds: &[Predicate], n_blocks: usize) -> Result<WorldState, StateError> {
        let check = |x: BlockId| {
            if x.slot() < n_blocks {
                Ok(x)
            } else {
                Err(StateError::UnknownBlock(x))
            }
        };
        let conflict = |block, detail: &str| StateError::Conflict {
            block,
            detail: detail.to_string(),
        };

        let mut below_of: BTreeMap<BlockId, BlockId> = BTreeMap::new();
        let mut above_of: BTreeMap<BlockId, BlockId> = BTreeMap::new();
        let mut on_table = BTreeSet::new();
        let mut clear = BTreeSet::new();
        let mut holding = BTreeSet::new();
        let mut hand_empty = false;

        for p in preds {
            match *p {
                Predicate::On { above, below } => {
                    check(above)?;
                    check(below)?;
                    if above == below {
                        return Err(conflict(above, "on itself"));
                    }
                    if let Some(prev) = below_of.insert(above, below) {
                        if prev != below {
                            return Err(conflict(above, "on two different blocks"));
                        }
                    }
                    if let Some(prev) = above_of.insert(below, above) {
                        if prev != above {
                            return Err(conflict(below, "supports two different blocks"));
                        }
                    }
                }
                Predicate::OnTable(x) => {
                    on_table.insert(check(x)?);
                }
                Predicate::Clear(x) => {
                    clear.insert(check(x)?);
                }
                Predicate::HandEmpty => hand_empty = true,
                Predicate::Holding(x) => {
                    holding.insert(check(x)?);
                }
            }
        }

        let held = match (hand_empty, holding.len()) {
            (true, 0) => None,
            (false, 1) => holding.iter().next().copied(),
            (true, _) => return Err(StateError::BadHand("both handempty and holding".into())),
            (false, 0) => return Err(StateError::BadHand("neither handempty nor holding".into())),
            (false, _) => return Err(StateError::BadHand("holding more than one block".into())),
        };

        for slot in 0..n_blocks {
            let x = BlockId(slot as u32 + 1);
            let supports = usize::from(below_of.contains_key(&x))
                + usize::from(on_table.contains(&x))
                + usize::from(held == Some(x));
            if supports == 0 {
                return Err(StateError::MissingPredicate(x));
            }
            if supports > 1 {
                return Err(conflict(x, "more than one of on/ontable/holding"));
            }
            if held == Some(x) && (above_of.contains_key(&x) || clear.contains(&x)) {
                return Err(conflict(x, "held block cannot support or be clear"));
            }
        }

        // Walk up from every table block; anything left over sits on a loop.
        let mut towers = Vec::new();
        let mut placed = 0usize;
        for &base in &on_table {
            let mut tower = vec![base];
            let mut cur = base;
            while let Some(&next) = above_of.get(&cur) {
                tower.push(next);
                cur = next;
                if tower.len() > n_blocks {
                    return Err(StateError::Cycle(base));
                }
            }
            placed += tower.len();
            towers.push(tower);
        }
        if placed + usize::from(held.is_some()) != n_blocks {
            let stray = below_of
                .keys()
                .find(|x| !towers.iter().flatten().any(|y| y == *x))
                .copied()
                .unwrap_or(BlockId(1));
            return Err(StateError::Cycle(stray));
        }

        for t in &towers {
            let top = *t.last().expect("nonempty");
            if !clear.contains(&top) {
                return Err(StateError::MissingPredicate(top));
            }
        }
        for &x in &clear {
            if above_of.contains_key(&x) {
                return Err(conflict(x, "clear but covered"));
            }
        }

        Ok(WorldState { towers, held })
    }
}

impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.held == other.held
            && self.towers.len() == other.towers.len()
            && self.canonical() == other.canonical()
    }
}

impl Eq for WorldState {}

impl Hash for WorldState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical().hash(state);
    }
}

/// Why a plan was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanFailure {
    /// `step` is 1-based.
    #[error("step {step}: {source}")]
    Precondition { step: usize, source: StateError },
    #[error("goal not satisfied after {steps} steps")]
    GoalUnmet { steps: usize },
    #[error(transparent)]
    Goal(StateError),
}

impl PlanFailure {
    /// Step number for reports: the failing action, or the plan length when
    /// the plan ran to completion without reaching the goal.
    pub fn step(&self) -> usize {
        match self {
            PlanFailure::Precondition { step, .. } => *step,
            PlanFailure::GoalUnmet { steps } => *steps,
            PlanFailure::Goal(_) => 0,
        }
    }
}

/// Executes `plan` from `init` and checks the goal; returns the final state.
pub fn validate(init: &WorldState, goal: &GoalSpec, plan: &[Action]) -> Result<WorldState, PlanFailure> {
    let mut state = init.clone();
    for (i, &action) in plan.iter().enumerate() {
        state
            .apply_mut(action)
            .map_err(|source| PlanFailure::Precondition { step: i + 1, source })?;
    }
    if state.satisfies(goal).map_err(PlanFailure::Goal)? {
        Ok(state)
    } else {
        Err(PlanFailure::GoalUnmet { steps: plan.len() })
    }
}
