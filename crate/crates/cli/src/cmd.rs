use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use serde_json::json;

use pstar::generator::{generate_curriculum, write_curriculum, Curriculum, CurriculumSchedule, GenError, MANIFEST_FILE};
use pstar::graphrw::{
    emit_graph_plan, emit_graph_problem, goal_edges, parse_graph_plan, parse_graph_plan_any, parse_graph_problem,
    to_graph, translate_graph_plan, translate_plan, validate_graph_plan,
};
use pstar::harness::metrics::{plot_csv, render_text, summarize};
use pstar::harness::{
    evaluate_to_file, load_instances, make_producer, read_records, EvalOptions, GoalClass, HarnessError,
    ProducerConfig, Representation,
};
use pstar::pddl::{emit_plan, emit_problem, parse_plan, parse_plan_any, parse_problem, ParseMode, PlanDoc, ProblemDoc};
use pstar::planner::{optimal_cost, synthesize_optimal_plan, uniform_cost_oracle, SearchLimits};
use pstar::state::validate as validate_plan;

use crate::{EvaluateArgs, Format, GenerateArgs, ReportArgs, SolveArgs, Target, TranslateArgs, Usage, ValidateArgs};

pub struct Ctx {
    pub seed: u64,
    pub format: Format,
}

impl Ctx {
    /// Prints `text` or, in JSON mode, `value` as a single line.
    fn emit(&self, text: impl AsRef<str>, value: serde_json::Value) {
        match self.format {
            Format::Text => println!("{}", text.as_ref()),
            Format::Json => println!("{value}"),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn load_problem(path: &Path) -> Result<ProblemDoc> {
    let text = read(path)?;
    parse_problem(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn representation(s: &str) -> Result<Representation> {
    s.parse().map_err(usage)
}

fn load_schedule(path: &Path) -> Result<CurriculumSchedule> {
    let text = read(path)?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn generate(ctx: &Ctx, args: GenerateArgs) -> Result<ExitCode> {
    let mut schedule = match (&args.curriculum, &args.params) {
        (Some(name), _) => {
            let c: Curriculum = name.parse().map_err(|e: GenError| usage(e.to_string()))?;
            CurriculumSchedule::preset(c)
        }
        (None, Some(path)) => load_schedule(path)?,
        (None, None) => return Err(usage("one of --curriculum or --params is required")),
    };
    if let Some(cap) = args.max_h_min {
        schedule = schedule.capped(cap);
    }
    schedule.validate().map_err(|e| usage(e.to_string()))?;
    let dir = args.out.unwrap_or_else(|| PathBuf::from("out").join(&schedule.name));

    let instances = generate_curriculum(&schedule, ctx.seed, args.max_attempts)?;
    write_curriculum(&dir, &instances)?;

    let costs: Vec<u64> = instances.iter().map(|i| i.cost.total).collect();
    let lo = costs.iter().min().copied().unwrap_or(0);
    let hi = costs.iter().max().copied().unwrap_or(0);
    ctx.emit(
        format!("{}: {} instances, c_opt {lo}..{hi} -> {}", schedule.name, instances.len(), dir.display()),
        json!({
            "curriculum": schedule.name,
            "seed": ctx.seed,
            "instances": instances.len(),
            "c_opt_min": lo,
            "c_opt_max": hi,
            "dir": dir,
            "manifest": dir.join(MANIFEST_FILE),
        }),
    );
    Ok(ExitCode::SUCCESS)
}

pub fn solve(ctx: &Ctx, args: SolveArgs) -> Result<ExitCode> {
    let problem = load_problem(&args.problem)?;
    let init = problem.initial_state().context("initial state")?;
    let (plan, c_opt) = if init.satisfies(&problem.goal)? {
        (PlanDoc::default(), 0)
    } else if args.oracle {
        let limits = SearchLimits { max_states: args.max_states, max_time: Duration::from_secs(args.max_time_secs) };
        let plan = uniform_cost_oracle(&problem, limits)?;
        let len = plan.len() as u64;
        (plan, len)
    } else {
        let cost = optimal_cost(&problem)?;
        (synthesize_optimal_plan(&problem)?, cost.total)
    };
    let out = args.out.unwrap_or_else(|| args.problem.with_extension("plan"));
    write(&out, &emit_plan(&plan))?;
    ctx.emit(
        format!("c_opt={c_opt} plan_len={}", plan.len()),
        json!({
            "c_opt": c_opt,
            "plan_len": plan.len(),
            "goal_class": GoalClass::of(&problem),
            "oracle": args.oracle,
            "plan_file": out,
        }),
    );
    Ok(ExitCode::SUCCESS)
}

pub fn validate(ctx: &Ctx, args: ValidateArgs) -> Result<ExitCode> {
    let repr = representation(&args.representation)?;
    let problem = load_problem(&args.problem)?;
    let text = read(&args.plan)?;
    let init = problem.initial_state().context("initial state")?;
    let parse_failure = |e: String| usage(format!("{}: {e}", args.plan.display()));

    let (len, mode, outcome): (usize, ParseMode, Result<(), (usize, String)>) = match repr {
        Representation::Blocksworld => {
            let (plan, mode) = if args.lenient {
                parse_plan_any(&text)
            } else {
                parse_plan(&text, ParseMode::Strict).map(|p| (p, ParseMode::Strict))
            }
            .map_err(|e| parse_failure(e.to_string()))?;
            let outcome = validate_plan(&init, &problem.goal, &plan.steps)
                .map(drop)
                .map_err(|f| (f.step(), f.to_string()));
            (plan.len(), mode, outcome)
        }
        Representation::Graph => {
            let (ops, mode) = if args.lenient {
                parse_graph_plan_any(&text)
            } else {
                parse_graph_plan(&text, ParseMode::Strict).map(|p| (p, ParseMode::Strict))
            }
            .map_err(|e| parse_failure(e.to_string()))?;
            let outcome = validate_graph_plan(&to_graph(&init), &goal_edges(&problem.goal), &ops)
                .map(drop)
                .map_err(|(step, e)| match e {
                    Some(e) => (step, e.to_string()),
                    None => (step, format!("goal pattern not reached after {step} op(s)")),
                });
            (ops.len(), mode, outcome)
        }
    };

    match outcome {
        Ok(()) => {
            ctx.emit(format!("VALID len={len}"), json!({ "valid": true, "len": len, "parse_mode": mode }));
            Ok(ExitCode::SUCCESS)
        }
        Err((step, reason)) => {
            ctx.emit(
                format!("INVALID step={step} reason={reason}"),
                json!({ "valid": false, "len": len, "step": step, "reason": reason, "parse_mode": mode }),
            );
            Ok(ExitCode::FAILURE)
        }
    }
}

pub fn translate(ctx: &Ctx, args: TranslateArgs) -> Result<ExitCode> {
    let (kind, path) = match (&args.problem, &args.plan) {
        (Some(p), None) => ("problem", p),
        (None, Some(p)) => ("plan", p),
        _ => return Err(usage("exactly one of --problem or --plan is required")),
    };
    let text = read(path)?;
    let mismatch = |e: String| usage(format!("{}: not a {kind} in the source format: {e}", path.display()));
    let translated = match (kind, args.to) {
        ("problem", Target::Graph) => {
            emit_graph_problem(&parse_problem(&text).map_err(|e| mismatch(e.to_string()))?)
        }
        ("problem", Target::Blocks) => {
            let graph = parse_graph_problem(&text).map_err(|e| mismatch(e.to_string()))?;
            let doc = graph.to_problem_doc(&args.name).map_err(|e| mismatch(e.to_string()))?;
            emit_problem(&doc).map_err(|e| mismatch(e.to_string()))?
        }
        (_, Target::Graph) => {
            let plan = parse_plan(&text, ParseMode::Strict).map_err(|e| mismatch(e.to_string()))?;
            emit_graph_plan(&translate_plan(&plan))
        }
        (_, Target::Blocks) => {
            let ops = parse_graph_plan(&text, ParseMode::Strict).map_err(|e| mismatch(e.to_string()))?;
            emit_plan(&translate_graph_plan(&ops).map_err(|e| mismatch(e.to_string()))?)
        }
    };
    let to = match args.to {
        Target::Graph => "graph",
        Target::Blocks => "blocks",
    };
    match &args.out {
        Some(out) => {
            write(out, &translated)?;
            ctx.emit(
                format!("{kind} -> {to}: {}", out.display()),
                json!({ "kind": kind, "to": to, "out": out }),
            );
        }
        None => match ctx.format {
            Format::Text if translated.is_empty() || translated.ends_with('\n') => print!("{translated}"),
            Format::Text => println!("{translated}"),
            Format::Json => println!("{}", json!({ "kind": kind, "to": to, "text": translated })),
        },
    }
    Ok(ExitCode::SUCCESS)
}

fn load_producer_config(path: Option<&Path>) -> Result<ProducerConfig> {
    let Some(path) = path else { return Ok(ProducerConfig::builtin()) };
    let text = read(path)?;
    let config: ProducerConfig = toml::from_str(&text)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

pub fn evaluate(ctx: &Ctx, args: EvaluateArgs) -> Result<ExitCode> {
    let repr = representation(&args.representation)?;
    let config = load_producer_config(args.producer_config.as_deref())?;
    let producer = make_producer(&config)?;
    let instances = load_instances(&args.manifest)?;
    let opts = EvalOptions::new(repr, config.parallelism);
    let evaluated = evaluate_to_file(&instances, producer.as_ref(), &opts, &args.out)?;

    let ids: HashSet<&str> = instances.iter().map(|i| i.id.as_str()).collect();
    let records: Vec<_> = read_records(&args.out)?
        .into_iter()
        .filter(|r| ids.contains(r.instance_id.as_str()) && r.producer == producer.id() && r.representation == repr)
        .collect();
    let valid = records.iter().filter(|r| r.valid).count();
    let skipped = instances.len() - evaluated;
    ctx.emit(
        format!(
            "{}: evaluated {evaluated}, skipped {skipped} already recorded; valid {valid}/{} -> {}",
            producer.id(),
            records.len(),
            args.out.display()
        ),
        json!({
            "producer": producer.id(),
            "representation": repr,
            "evaluated": evaluated,
            "skipped": skipped,
            "records": records.len(),
            "valid": valid,
            "out": args.out,
        }),
    );
    Ok(ExitCode::SUCCESS)
}

pub const SUMMARY_FILE: &str = "summary.txt";
pub const CSV_FILE: &str = "plot.csv";

pub fn report(ctx: &Ctx, args: ReportArgs) -> Result<ExitCode> {
    let records = read_records(&args.records)?;
    let report = summarize(&records);
    let text = render_text(&report);
    let mut files = serde_json::Map::new();
    if let Some(dir) = &args.out {
        let summary = dir.join(SUMMARY_FILE);
        let csv = dir.join(CSV_FILE);
        write(&summary, &text)?;
        write(&csv, &plot_csv(&records))?;
        files.insert("summary_file".into(), json!(summary));
        files.insert("csv_file".into(), json!(csv));
    }
    match ctx.format {
        Format::Text => print!("{text}"),
        Format::Json => {
            let mut value = json!({
                "records": records.len(),
                "groups": report.groups.iter().map(|g| {
                    let mut v = serde_json::to_value(g).expect("summaries serialize");
                    v["success_rate"] = json!(g.success_rate());
                    v["optimal_rate"] = json!(g.optimal_rate());
                    v
                }).collect::<Vec<_>>(),
                "fit": report.fit,
            });
            value.as_object_mut().expect("object").extend(files);
            println!("{value}");
        }
    }
    Ok(ExitCode::SUCCESS)
}
