//! Seeded curriculum generation.
//!
//! Every attempt draws from its own ChaCha8 stream, seeded by a SplitMix64
//! mix of (master seed, curriculum name, step, attempt), so any single
//! instance can be regenerated without replaying the rest of the curriculum.

use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::Execution;
use crate::pddl::{emit_problem, Layout, PddlError, ProblemDoc};
use crate::planner::{cost_for_state, CostBreakdown, PlanError};
use crate::state::{BlockId, GoalSpec, Location, WorldState};

pub const DEFAULT_MAX_ATTEMPTS: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalMode {
    Chain,
    Retrieve,
    Interleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CurriculumParams {
    pub width: usize,
    pub h_min: usize,
    pub h_max: usize,
    pub targets: usize,
    pub mode: GoalMode,
}

impl CurriculumParams {
    pub fn chain(width: usize, h_min: usize, h_max: usize, targets: usize) -> Self {
        CurriculumParams { width, h_min, h_max, targets, mode: GoalMode::Chain }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InfeasibleParams(m));
        if self.width == 0 {
            return bad("width must be at least 1".into());
        }
        if self.h_min == 0 || self.h_min > self.h_max {
            return bad(format!("bad height range [{}, {}]", self.h_min, self.h_max));
        }
        if self.width.saturating_mul(self.h_max) > u32::MAX as usize / 2 {
            return bad("instance too large".into());
        }
        match self.mode {
            GoalMode::Chain if self.targets == 0 || self.targets > self.width => {
                bad(format!("chain mode needs 1 <= S <= W, got S={} W={}", self.targets, self.width))
            }
            GoalMode::Retrieve if self.targets != 1 => bad(format!("retrieve mode needs S=1, got {}", self.targets)),
            GoalMode::Interleaved if self.targets != 2 * self.width || self.h_min < 3 => bad(format!(
                "interleaved mode needs S=2W and h_min>=3, got S={} W={} h_min={}",
                self.targets, self.width, self.h_min
            )),
            _ => Ok(()),
        }
    }

    /// `h05-10_w006_s02`.
    pub fn label(&self) -> String {
        format!("h{:02}-{:02}_w{:03}_s{:02}", self.h_min, self.h_max, self.width, self.targets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Curriculum {
    HighTowers,
    Harvest,
    InterleavedHarvest,
    GrandChallenge,
}

impl Curriculum {
    pub const ALL: [Curriculum; 4] =
        [Curriculum::HighTowers, Curriculum::Harvest, Curriculum::InterleavedHarvest, Curriculum::GrandChallenge];

    pub fn name(self) -> &'static str {
        match self {
            Curriculum::HighTowers => "high_towers",
            Curriculum::Harvest => "harvest",
            Curriculum::InterleavedHarvest => "interleaved_harvest",
            Curriculum::GrandChallenge => "grand_challenge",
        }
    }
}

impl fmt::Display for Curriculum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Curriculum {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Curriculum::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| GenError::UnknownCurriculum(s.to_string()))
    }
}

/// Grand-challenge rows: (W, S, h_min, h_max).
const GRAND_CHALLENGE: [(usize, usize, usize, usize); 33] = [
    (6, 2, 5, 10),
    (9, 3, 6, 11),
    (11, 3, 8, 13),
    (14, 4, 9, 14),
    (17, 4, 11, 16),
    (20, 5, 12, 17),
    (23, 6, 14, 19),
    (26, 6, 15, 20),
    (29, 7, 17, 22),
    (32, 7, 19, 24),
    (35, 8, 20, 25),
    (37, 9, 22, 27),
    (40, 9, 23, 28),
    (43, 10, 25, 30),
    (46, 10, 26, 31),
    (49, 11, 28, 33),
    (52, 12, 29, 34),
    (55, 12, 31, 36),
    (58, 13, 32, 37),
    (61, 13, 34, 39),
    (63, 14, 36, 41),
    (66, 15, 37, 42),
    (69, 15, 39, 44),
    (72, 16, 40, 45),
    (75, 16, 42, 47),
    (78, 17, 43, 48),
    (81, 18, 45, 50),
    (84, 18, 46, 51),
    (87, 19, 48, 53),
    (90, 20, 50, 55),
    (92, 20, 51, 56),
    (95, 21, 53, 58),
    (98, 21, 54, 59),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    pub name: String,
    pub steps: Vec<CurriculumParams>,
}

impl CurriculumSchedule {
    pub fn preset(c: Curriculum) -> CurriculumSchedule {
        let steps = match c {
            Curriculum::HighTowers => (0..50)
                .map(|k| {
                    let h = 8 + 20 * k;
                    CurriculumParams { width: 12, h_min: h, h_max: h + 5, targets: 1, mode: GoalMode::Retrieve }
                })
                .collect(),
            Curriculum::Harvest => (4..=220).step_by(4).map(|w| CurriculumParams::chain(w, 5, 8, w)).collect(),
            Curriculum::InterleavedHarvest => (2..=100)
                .step_by(2)
                .map(|w| CurriculumParams { width: w, h_min: 5, h_max: 8, targets: 2 * w, mode: GoalMode::Interleaved })
                .collect(),
            Curriculum::GrandChallenge => GRAND_CHALLENGE
                .iter()
                .map(|&(w, s, lo, hi)| CurriculumParams::chain(w, lo, hi, s))
                .collect(),
        };
        CurriculumSchedule { name: c.name().to_string(), steps }
    }

    /// Drops steps whose minimum height exceeds `max_h_min`.
    pub fn capped(mut self, max_h_min: usize) -> CurriculumSchedule {
        self.steps.retain(|p| p.h_min <= max_h_min);
        self
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.steps.is_empty() {
            return Err(GenError::InfeasibleParams(format!("schedule `{}` has no steps", self.name)));
        }
        self.steps.iter().try_for_each(CurriculumParams::validate)
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),
    #[error("unknown curriculum `{0}`")]
    UnknownCurriculum(String),
    #[error("step {step}: no instance with C_opt >= {floor} after {attempts} attempts")]
    RejectionExhausted { step: usize, attempts: u32, floor: u64 },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {source}")]
    Manifest { path: PathBuf, line: usize, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> GenError + '_ {
    move |source| GenError::Io { path: path.to_path_buf(), source }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable per-attempt seed.
pub fn derive_seed(master: u64, curriculum: &str, step: usize, attempt: u32) -> u64 {
    // FNV-1a over the name keeps the mix independent of Rust's hasher.
    let mut name_hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in curriculum.bytes() {
        name_hash ^= u64::from(byte);
        name_hash = name_hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut h = splitmix64(master);
    h = splitmix64(h ^ name_hash);
    h = splitmix64(h ^ step as u64);
    splitmix64(h ^ u64::from(attempt))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedInstance {
    pub curriculum: String,
    pub index: usize,
    pub params: CurriculumParams,
    pub seed: u64,
    pub attempts: u32,
    pub cost: CostBreakdown,
    pub doc: ProblemDoc,
}

impl GeneratedInstance {
    pub fn file_name(&self) -> String {
        format!("{:03}_{}.pddl", self.index, self.params.label())
    }
}

/// Drawn towers and goal, before scrambling.
struct Drawn {
    state: WorldState,
    goal: GoalSpec,
}

fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    rng.random_range(0..n as u32) as usize
}

fn draw_layout(params: &CurriculumParams, rng: &mut ChaCha8Rng) -> Drawn {
    let heights: Vec<usize> = (0..params.width)
        .map(|_| rng.random_range(params.h_min as u32..=params.h_max as u32) as usize)
        .collect();
    let n: usize = heights.iter().sum();
    let mut names: Vec<BlockId> = (1..=n as u32).map(BlockId::new).collect();
    names.shuffle(rng);
    let mut rest = names.as_slice();
    let towers: Vec<Vec<BlockId>> = heights
        .iter()
        .map(|&h| {
            let (tower, tail) = rest.split_at(h);
            rest = tail;
            tower.to_vec()
        })
        .collect();

    let goal = match params.mode {
        GoalMode::Chain => {
            let base_tower = below(rng, params.width);
            let mut targets = vec![towers[base_tower][0]];
            for k in index::sample(rng, params.width - 1, params.targets - 1) {
                let t = if k >= base_tower { k + 1 } else { k };
                targets.push(towers[t][below(rng, towers[t].len())]);
            }
            GoalSpec::Chain(targets)
        }
        GoalMode::Retrieve => {
            let mut pos = below(rng, n);
            let tower = towers
                .iter()
                .find(|t| {
                    let hit = pos < t.len();
                    if !hit {
                        pos -= t.len();
                    }
                    hit
                })
                .expect("position falls inside some tower");
            GoalSpec::Retrieve(tower[pos])
        }
        GoalMode::Interleaved => {
            let mut deep = Vec::with_capacity(params.width);
            let mut shallow = Vec::with_capacity(params.width);
            for tower in &towers {
                let pair = index::sample(rng, tower.len(), 2);
                let (a, b) = (pair.index(0), pair.index(1));
                deep.push(tower[a.min(b)]);
                shallow.push(tower[a.max(b)]);
            }
            deep.extend(shallow);
            GoalSpec::Chain(deep)
        }
    };
    let state = WorldState::new(towers, None).expect("drawn towers are a valid state");
    Drawn { state, goal }
}

fn materialize(name: String, layout: Drawn, rng: &mut ChaCha8Rng) -> ProblemDoc {
    let mut init = layout.state.to_predicates();
    init.shuffle(rng);
    ProblemDoc {
        name,
        objects: (1..=layout.state.n_blocks() as u32).map(BlockId::new).collect(),
        init,
        goal: layout.goal,
        layout: Layout::Indented,
    }
}

/// One instance from one seed, without rejection.
pub fn generate_instance(params: &CurriculumParams, seed: u64, curriculum: &str) -> Result<GeneratedInstance, GenError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = draw_layout(params, &mut rng);
    let cost = cost_for_state(&layout.state, &layout.goal)?;
    let doc = materialize(format!("{curriculum}_{}", params.label()), layout, &mut rng);
    Ok(GeneratedInstance { curriculum: curriculum.to_string(), index: 0, params: *params, seed, attempts: 1, cost, doc })
}

/// Runs the schedule step by step, redrawing each step until its C_opt is at
/// least the previously accepted one.
pub fn generate_curriculum(
    schedule: &CurriculumSchedule,
    master: u64,
    max_attempts: u32,
) -> Result<Vec<GeneratedInstance>, GenError> {
    schedule.validate()?;
    let mut out: Vec<GeneratedInstance> = Vec::with_capacity(schedule.steps.len());
    let mut floor = 0u64;
    for (step, params) in schedule.steps.iter().enumerate() {
        let mut accepted = None;
        for attempt in 0..max_attempts {
            let seed = derive_seed(master, &schedule.name, step, attempt);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let layout = draw_layout(params, &mut rng);
            let cost = cost_for_state(&layout.state, &layout.goal)?;
            if cost.total < floor {
                continue;
            }
            let doc = materialize(format!("{}_{}", schedule.name, params.label()), layout, &mut rng);
            accepted = Some(GeneratedInstance {
                curriculum: schedule.name.clone(),
                index: step,
                params: *params,
                seed,
                attempts: attempt + 1,
                cost,
                doc,
            });
            break;
        }
        let inst = accepted.ok_or(GenError::RejectionExhausted { step, attempts: max_attempts, floor })?;
        floor = inst.cost.total;
        out.push(inst);
    }
    Ok(out)
}

/// Independent curricula run side by side; steps inside one stay sequential.
pub fn generate_many(
    schedules: &[CurriculumSchedule],
    master: u64,
    max_attempts: u32,
    exec: Execution,
) -> Vec<Result<Vec<GeneratedInstance>, GenError>> {
    exec.map(schedules, |s| generate_curriculum(s, master, max_attempts))
}

/// Checks the class constraints of a generated instance from its emitted
/// form: one target per tower with the base on the table (chain), exactly
/// two per tower (interleaved), a single held target (retrieve).
pub fn verify_structure(inst: &GeneratedInstance) -> Result<(), String> {
    let state = inst.doc.initial_state().map_err(|e| e.to_string())?;
    let p = &inst.params;
    if state.towers().len() != p.width {
        return Err(format!("expected {} towers, found {}", p.width, state.towers().len()));
    }
    if let Some(t) = state.towers().iter().find(|t| t.len() < p.h_min || t.len() > p.h_max) {
        return Err(format!("tower of height {} outside [{}, {}]", t.len(), p.h_min, p.h_max));
    }
    let tower_of = |x: BlockId| match state.locate(x) {
        Some(Location::Tower { tower, .. }) => Ok(tower),
        _ => Err(format!("target {x} is not in a tower")),
    };
    match (&inst.doc.goal, p.mode) {
        (GoalSpec::Retrieve(t), GoalMode::Retrieve) => tower_of(*t).map(|_| ()),
        (GoalSpec::Chain(targets), GoalMode::Chain) => {
            if targets.len() != p.targets {
                return Err(format!("expected {} targets, found {}", p.targets, targets.len()));
            }
            if !state.is_on_table(targets[0]) {
                return Err(format!("base target {} is not on the table", targets[0]));
            }
            let mut per_tower = vec![0usize; p.width];
            for &t in targets {
                per_tower[tower_of(t)?] += 1;
            }
            match per_tower.iter().any(|&c| c > 1) {
                true => Err("two targets share a tower".into()),
                false => Ok(()),
            }
        }
        (GoalSpec::Chain(targets), GoalMode::Interleaved) => {
            if targets.len() != 2 * p.width {
                return Err(format!("expected {} targets, found {}", 2 * p.width, targets.len()));
            }
            let mut per_tower = vec![0usize; p.width];
            for &t in targets {
                per_tower[tower_of(t)?] += 1;
            }
            let (deep, shallow) = targets.split_at(p.width);
            for (d, s) in deep.iter().zip(shallow) {
                if tower_of(*d)? != tower_of(*s)? || state.depth(*s).ok() >= state.depth(*d).ok() {
                    return Err(format!("{s} is not above {d} in the same tower"));
                }
            }
            match per_tower.iter().all(|&c| c == 2) {
                true => Ok(()),
                false => Err("towers do not hold exactly two targets".into()),
            }
        }
        (goal, mode) => Err(format!("goal {goal:?} does not match mode {mode:?}")),
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub curriculum: String,
    pub index: usize,
    pub file: String,
    pub problem: String,
    pub params: CurriculumParams,
    pub seed: u64,
    pub attempts: u32,
    pub c_opt: u64,
}

impl ManifestRecord {
    pub fn of(inst: &GeneratedInstance) -> ManifestRecord {
        ManifestRecord {
            curriculum: inst.curriculum.clone(),
            index: inst.index,
            file: inst.file_name(),
            problem: inst.doc.name.clone(),
            params: inst.params,
            seed: inst.seed,
            attempts: inst.attempts,
            c_opt: inst.cost.total,
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Writes `<dir>/<index>_<params>.pddl` for each instance plus
/// `<dir>/manifest.jsonl`.
pub fn write_curriculum(dir: &Path, instances: &[GeneratedInstance]) -> Result<Vec<ManifestRecord>, GenError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut manifest = io::BufWriter::new(fs::File::create(&manifest_path).map_err(io_err(&manifest_path))?);
    let mut records = Vec::with_capacity(instances.len());
    for inst in instances {
        let record = ManifestRecord::of(inst);
        let path = dir.join(&record.file);
        fs::write(&path, emit_problem(&inst.doc)?).map_err(io_err(&path))?;
        let line = serde_json::to_string(&record).expect("manifest records serialize");
        writeln!(manifest, "{line}").map_err(io_err(&manifest_path))?;
        records.push(record);
    }
    manifest.flush().map_err(io_err(&manifest_path))?;
    Ok(records)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, GenError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|source| GenError::Manifest { path: path.to_path_buf(), line: i + 1, source })?;
        out.push(record);
    }
    Ok(out)
}
