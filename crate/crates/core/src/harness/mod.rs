//! Evaluation harness: prompt assembly, producers, validation-driven scoring
//! and append-only result files.

pub mod metrics;
pub mod producer;
pub mod prompt;

use std::collections::HashSet;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{read_manifest, CurriculumParams, GenError};
use crate::graphrw::{goal_edges, parse_graph_plan, parse_graph_plan_any, to_graph, validate_graph_plan};
use crate::par::Execution;
use crate::pddl::{emit_problem, parse_plan, parse_plan_any, parse_problem, ParseMode, PddlError, PlanDoc, ProblemDoc};
use crate::planner::{classify, optimal_cost, GoalShape};
use crate::state::validate;

pub use metrics::{fit_tokens_per_step, optimality_gap, summarize, FitResult, Gap, Report};
pub use producer::{make_producer, Producer, ProducerConfig, ProducerKind};
pub use prompt::{build_prompt, default_exemplar, PromptBundle, Representation};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid exemplar: {0}")]
    InvalidExemplar(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {source}")]
    Record { path: PathBuf, line: usize, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// Which cost formula the instance falls under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalClass {
    Standard,
    Retrieve,
    Interleaved,
    Other,
}

impl GoalClass {
    pub fn of(problem: &ProblemDoc) -> GoalClass {
        let Ok(state) = problem.initial_state() else { return GoalClass::Other };
        match classify(&state, &problem.goal) {
            Ok(GoalShape::Standard { .. }) => GoalClass::Standard,
            Ok(GoalShape::Retrieve { .. }) => GoalClass::Retrieve,
            Ok(GoalShape::Interleaved { .. }) => GoalClass::Interleaved,
            Err(_) => GoalClass::Other,
        }
    }
}

/// A problem queued for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub curriculum: String,
    pub complexity_axis: u64,
    pub c_opt: u64,
    pub doc: ProblemDoc,
}

/// The x-axis used when plotting a curriculum: tower height for high
/// towers, width for the harvests, `h_min·W·S` otherwise.
pub fn complexity_axis(curriculum: &str, params: &CurriculumParams) -> u64 {
    match curriculum {
        "high_towers" => params.h_min as u64,
        "harvest" | "interleaved_harvest" => params.width as u64,
        _ => (params.h_min * params.width * params.targets) as u64,
    }
}

impl Instance {
    /// An ad-hoc instance; C_opt comes from the analytic formula.
    pub fn from_doc(id: impl Into<String>, curriculum: impl Into<String>, doc: ProblemDoc) -> Result<Instance, HarnessError> {
        let c_opt = optimal_cost(&doc).map_err(|e| HarnessError::Config(e.to_string()))?.total;
        Ok(Instance { id: id.into(), curriculum: curriculum.into(), complexity_axis: doc.n_blocks() as u64, c_opt, doc })
    }
}

/// Loads every problem listed in a generator manifest.
pub fn load_instances(manifest: &Path) -> Result<Vec<Instance>, HarnessError> {
    let dir = manifest.parent().unwrap_or(Path::new("."));
    read_manifest(manifest)?
        .into_iter()
        .map(|m| {
            let path = dir.join(&m.file);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            Ok(Instance {
                id: format!("{}/{}", m.curriculum, m.file.trim_end_matches(".pddl")),
                complexity_axis: complexity_axis(&m.curriculum, &m.params),
                curriculum: m.curriculum,
                c_opt: m.c_opt,
                doc: parse_problem(&text)?,
            })
        })
        .collect()
}

/// One producer-on-instance result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub schema_version: u32,
    pub instance_id: String,
    pub curriculum: String,
    pub producer: String,
    pub representation: Representation,
    pub goal_class: GoalClass,
    pub complexity_axis: u64,
    pub raw_output: String,
    pub parse_mode: Option<ParseMode>,
    pub valid: bool,
    pub plan_length: Option<u64>,
    pub c_opt: u64,
    pub gap: Option<Gap>,
    pub thinking_tokens: Option<u64>,
    pub wall_time_ms: u64,
    pub failure: Option<String>,
}

impl EvalRecord {
    /// Everything except timing, for determinism checks.
    pub fn without_timing(&self) -> EvalRecord {
        EvalRecord { wall_time_ms: 0, ..self.clone() }
    }
}

/// Outcome of checking a plan text against an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub parse_mode: Option<ParseMode>,
    pub plan_length: Option<u64>,
    pub valid: bool,
    pub failure: Option<String>,
}

/// Parses and validates `text` with the core semantics; nothing the producer
/// says about its own plan is trusted.
pub fn score_text(problem: &ProblemDoc, text: &str, representation: Representation, strict_only: bool) -> Verdict {
    let init = match problem.initial_state() {
        Ok(s) => s,
        Err(e) => return Verdict { parse_mode: None, plan_length: None, valid: false, failure: Some(e.to_string()) },
    };
    let parse_failed = |e: String| Verdict {
        parse_mode: None,
        plan_length: None,
        valid: false,
        failure: Some(format!("parse error: {e}")),
    };
    match representation {
        Representation::Blocksworld => {
            let parsed: Result<(PlanDoc, ParseMode), PddlError> = if strict_only {
                parse_plan(text, ParseMode::Strict).map(|p| (p, ParseMode::Strict))
            } else {
                parse_plan_any(text)
            };
            let (plan, mode) = match parsed {
                Ok(p) => p,
                Err(e) => return parse_failed(e.to_string()),
            };
            let failure = validate(&init, &problem.goal, &plan.steps).err().map(|e| e.to_string());
            Verdict {
                parse_mode: Some(mode),
                plan_length: Some(plan.len() as u64),
                valid: failure.is_none(),
                failure,
            }
        }
        Representation::Graph => {
            let parsed = if strict_only {
                parse_graph_plan(text, ParseMode::Strict).map(|p| (p, ParseMode::Strict))
            } else {
                parse_graph_plan_any(text)
            };
            let (ops, mode) = match parsed {
                Ok(p) => p,
                Err(e) => return parse_failed(e.to_string()),
            };
            let failure = match validate_graph_plan(&to_graph(&init), &goal_edges(&problem.goal), &ops) {
                Ok(_) => None,
                Err((step, Some(e))) => Some(format!("step {step}: {e}")),
                Err((step, None)) => Some(format!("goal pattern not reached after {step} op(s)")),
            };
            Verdict {
                parse_mode: Some(mode),
                plan_length: Some(ops.len() as u64),
                valid: failure.is_none(),
                failure,
            }
        }
    }
}

pub struct EvalOptions {
    pub representation: Representation,
    pub parallelism: usize,
    pub exec: Execution,
    pub exemplar: (ProblemDoc, PlanDoc),
}

impl EvalOptions {
    pub fn new(representation: Representation, parallelism: usize) -> EvalOptions {
        EvalOptions { representation, parallelism, exec: Execution::Parallel, exemplar: default_exemplar() }
    }
}

pub fn evaluate_one(inst: &Instance, producer: &dyn Producer, opts: &EvalOptions) -> EvalRecord {
    let started = Instant::now();
    let mut record = EvalRecord {
        schema_version: SCHEMA_VERSION,
        instance_id: inst.id.clone(),
        curriculum: inst.curriculum.clone(),
        producer: producer.id(),
        representation: opts.representation,
        goal_class: GoalClass::of(&inst.doc),
        complexity_axis: inst.complexity_axis,
        raw_output: String::new(),
        parse_mode: None,
        valid: false,
        plan_length: None,
        c_opt: inst.c_opt,
        gap: None,
        thinking_tokens: None,
        wall_time_ms: 0,
        failure: None,
    };
    let prepared = emit_problem(&inst.doc).map_err(HarnessError::from).and_then(|problem_text| {
        let (ex_p, ex_plan) = &opts.exemplar;
        let prompt = build_prompt(&inst.doc, (ex_p, ex_plan), opts.representation)?.render();
        Ok((problem_text, prompt))
    });
    match prepared {
        Err(e) => record.failure = Some(e.to_string()),
        Ok((problem_text, prompt)) => {
            let task = producer::Task {
                problem: &inst.doc,
                problem_text: &problem_text,
                prompt: &prompt,
                representation: opts.representation,
            };
            match producer.produce(&task) {
                Err(e) => record.failure = Some(format!("producer: {e}")),
                Ok(out) => {
                    record.thinking_tokens = out.thinking_tokens;
                    let verdict = score_text(&inst.doc, &out.text, opts.representation, producer.strict_output());
                    record.raw_output = out.text;
                    record.parse_mode = verdict.parse_mode;
                    record.plan_length = verdict.plan_length;
                    record.valid = verdict.valid;
                    record.failure = verdict.failure;
                    if verdict.valid {
                        record.gap = verdict.plan_length.map(|len| optimality_gap(len, inst.c_opt));
                    }
                }
            }
        }
    }
    record.wall_time_ms = started.elapsed().as_millis() as u64;
    record
}

/// Scores every instance; per-instance failures become invalid records.
pub fn evaluate(instances: &[Instance], producer: &dyn Producer, opts: &EvalOptions) -> Vec<EvalRecord> {
    opts.exec.map_bounded(instances, opts.parallelism.max(1), |inst| evaluate_one(inst, producer, opts))
}

pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>, HarnessError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|source| HarnessError::Record { path: path.to_path_buf(), line: i + 1, source })?;
        out.push(record);
    }
    Ok(out)
}

/// Evaluates into an append-only results file, skipping instances already
/// recorded there. Records are committed in instance order, a batch at a
/// time, so an interrupted run loses at most the batch in flight.
pub fn evaluate_to_file(
    instances: &[Instance],
    producer: &dyn Producer,
    opts: &EvalOptions,
    out: &Path,
) -> Result<usize, HarnessError> {
    let done: HashSet<String> = if out.exists() {
        read_records(out)?.into_iter().map(|r| r.instance_id).collect()
    } else {
        HashSet::new()
    };
    let pending: Vec<Instance> = instances.iter().filter(|i| !done.contains(&i.id)).cloned().collect();
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut file = fs::OpenOptions::new().create(true).append(true).open(out).map_err(io_err(out))?;
    let batch = opts.parallelism.max(1) * 4;
    for chunk in pending.chunks(batch) {
        let mut buf = String::new();
        for record in evaluate(chunk, producer, opts) {
            buf.push_str(&serde_json::to_string(&record).expect("records serialize"));
            buf.push('\n');
        }
        file.write_all(buf.as_bytes()).map_err(io_err(out))?;
        file.flush().map_err(io_err(out))?;
    }
    Ok(pending.len())
}
