use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pstar::harness::{optimality_gap, EvalRecord, GoalClass, Representation, SCHEMA_VERSION};
use pstar::pddl::{emit_plan, PlanDoc};
use pstar::state::{b, Action};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tempfile::TempDir;

fn pstar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pstar"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn copy_fixture(dir: &Path, name: &str) -> String {
    fs::copy(core_fixture(name), dir.join(name)).unwrap();
    name.to_string()
}

const GC: &str = "grand_challenge_h05-10_w006_s02.pddl";
const GC_PLAN: &str = "grand_challenge_h05-10_w006_s02.plan";

const SMALL_SCHEDULE: &str = r#"
name = "small"

[[steps]]
width = 2
h_min = 3
h_max = 5
targets = 1
mode = "retrieve"

[[steps]]
width = 3
h_min = 2
h_max = 4
targets = 2
mode = "chain"

[[steps]]
width = 4
h_min = 3
h_max = 5
targets = 3
mode = "chain"

[[steps]]
width = 3
h_min = 3
h_max = 5
targets = 6
mode = "interleaved"

[[steps]]
width = 6
h_min = 4
h_max = 6
targets = 4
mode = "chain"
"#;

fn small_manifest(dir: &Path) -> String {
    fs::write(dir.join("small.toml"), SMALL_SCHEDULE).unwrap();
    let o = pstar(dir, &["generate", "--params", "small.toml", "--seed", "3", "--out", "small"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    "small/manifest.jsonl".into()
}

fn manifest_costs(path: &Path) -> Vec<u64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["c_opt"].as_u64().unwrap())
        .collect()
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

// --- generate -------------------------------------------------------------

#[test]
fn generate_grand_challenge() {
    let tmp = TempDir::new().unwrap();
    let o = pstar(tmp.path(), &["generate", "--curriculum", "grand_challenge", "--seed", "7", "--out", "out/gc"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("grand_challenge: 33 instances, c_opt "));
    let costs = manifest_costs(&tmp.path().join("out/gc/manifest.jsonl"));
    assert_eq!(costs.len(), 33);
    assert!(costs.windows(2).all(|w| w[0] <= w[1]), "{costs:?}");
    let pddl = fs::read_dir(tmp.path().join("out/gc"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pddl"))
        .count();
    assert_eq!(pddl, 33);
}

#[test]
fn generate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    for out in ["a", "b"] {
        let o = pstar(tmp.path(), &["generate", "--curriculum", "harvest", "--seed", "7", "--out", out]);
        assert_eq!(code(&o), 0);
    }
    let a = dir_snapshot(&tmp.path().join("a"));
    assert_eq!(a.len(), 56);
    assert_eq!(a, dir_snapshot(&tmp.path().join("b")));

    let o = pstar(tmp.path(), &["generate", "--curriculum", "high_towers", "--max-h-min", "48", "--seed", "8", "--out", "c"]);
    assert_eq!(code(&o), 0);
    assert_ne!(dir_snapshot(&tmp.path().join("c")), a);
}

#[test]
fn generate_default_directory_and_json() {
    let tmp = TempDir::new().unwrap();
    let o = pstar(tmp.path(), &["--format", "json", "generate", "--curriculum", "high_towers", "--max-h-min", "30"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["instances"], 2);
    assert_eq!(v["seed"], 0);
    assert!(tmp.path().join("out/high_towers/manifest.jsonl").exists());
}

#[test]
fn generate_error_codes() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&pstar(tmp.path(), &["generate", "--curriculum", "bogus"])), 2);
    assert_eq!(code(&pstar(tmp.path(), &["generate"])), 2);
    assert_eq!(code(&pstar(tmp.path(), &["generate", "--curriculum", "harvest", "--params", "x.toml"])), 2);

    fs::write(tmp.path().join("bad.toml"), "name = \"bad\"\n[[steps]]\nwidth = 2\nh_min = 3\nh_max = 4\ntargets = 5\nmode = \"chain\"\n").unwrap();
    assert_eq!(code(&pstar(tmp.path(), &["generate", "--params", "bad.toml"])), 2);

    // The second step cannot reach the first step's C_opt.
    fs::write(
        tmp.path().join("steep.toml"),
        "name = \"steep\"\n\
         [[steps]]\nwidth = 6\nh_min = 9\nh_max = 9\ntargets = 6\nmode = \"chain\"\n\
         [[steps]]\nwidth = 2\nh_min = 1\nh_max = 1\ntargets = 2\nmode = \"chain\"\n",
    )
    .unwrap();
    let o = pstar(tmp.path(), &["generate", "--params", "steep.toml", "--max-attempts", "5"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("attempts"));
}

// --- solve ----------------------------------------------------------------

#[test]
fn solve_grand_challenge_fixture() {
    let tmp = TempDir::new().unwrap();
    let problem = copy_fixture(tmp.path(), GC);
    let o = pstar(tmp.path(), &["solve", "--problem", &problem]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "c_opt=22 plan_len=22");
    let plan = fs::read_to_string(tmp.path().join("grand_challenge_h05-10_w006_s02.plan")).unwrap();
    assert_eq!(plan.lines().count(), 22);
    let o = pstar(tmp.path(), &["validate", "--problem", &problem, "--plan", "grand_challenge_h05-10_w006_s02.plan"]);
    assert_eq!(stdout(&o).trim(), "VALID len=22");
}

#[test]
fn solve_bw_rand_4_with_oracle() {
    let tmp = TempDir::new().unwrap();
    let problem = copy_fixture(tmp.path(), "bw_rand_4.pddl");
    // Two separate towers as the goal is outside the closed form.
    assert_eq!(code(&pstar(tmp.path(), &["solve", "--problem", &problem])), 1);
    let o = pstar(tmp.path(), &["solve", "--problem", &problem, "--oracle", "--out", "oracle.plan"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "c_opt=6 plan_len=6");
    let o = pstar(tmp.path(), &["validate", "--problem", &problem, "--plan", "oracle.plan"]);
    assert_eq!(stdout(&o).trim(), "VALID len=6");

    let o = pstar(tmp.path(), &["solve", "--problem", &problem, "--oracle", "--max-states", "3", "--out", "x.plan"]);
    assert_eq!(code(&o), 1);
}

const SATISFIED: &str = "(define (problem done)
(:domain blocksworld-4ops)
(:objects b1 b2 b3)
(:init
(ontable b1)
(on b2 b1)
(clear b2)
(ontable b3)
(clear b3)
(handempty)
)
(:goal (and
(on b2 b1)
))
)
";

#[test]
fn satisfied_goal_needs_no_steps() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("done.pddl"), SATISFIED).unwrap();
    let o = pstar(tmp.path(), &["solve", "--problem", "done.pddl"]);
    assert_eq!(stdout(&o).trim(), "c_opt=0 plan_len=0");
    assert_eq!(fs::read_to_string(tmp.path().join("done.plan")).unwrap(), "");
    fs::write(tmp.path().join("empty.plan"), "").unwrap();
    let o = pstar(tmp.path(), &["validate", "--problem", "done.pddl", "--plan", "empty.plan"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "VALID len=0");
}

#[test]
fn solve_rejects_unparsable_problem() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("junk.pddl"), "(define (problem").unwrap();
    assert_eq!(code(&pstar(tmp.path(), &["solve", "--problem", "junk.pddl"])), 2);
    assert_eq!(code(&pstar(tmp.path(), &["solve", "--problem", "missing.pddl"])), 1);
}

// --- validate -------------------------------------------------------------

#[test]
fn validate_fixture_and_truncation() {
    let tmp = TempDir::new().unwrap();
    let problem = copy_fixture(tmp.path(), GC);
    let plan = copy_fixture(tmp.path(), GC_PLAN);
    let o = pstar(tmp.path(), &["validate", "--problem", &problem, "--plan", &plan]);
    assert_eq!((code(&o), stdout(&o).trim().to_string()), (0, "VALID len=22".to_string()));

    let text = fs::read_to_string(tmp.path().join(&plan)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    fs::write(tmp.path().join("short.plan"), lines[..lines.len() - 1].join("\n")).unwrap();
    let o = pstar(tmp.path(), &["validate", "--problem", &problem, "--plan", "short.plan"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout(&o).trim(), "INVALID step=21 reason=goal not satisfied after 21 steps");

    let o = pstar(tmp.path(), &["--format", "json", "validate", "--problem", &problem, "--plan", "short.plan"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!((v["valid"].clone(), v["step"].clone()), (false.into(), 21.into()));

    // Dropping the first action breaks a precondition at step 1.
    fs::write(tmp.path().join("headless.plan"), lines[1..].join("\n")).unwrap();
    let o = pstar(tmp.path(), &["validate", "--problem", &problem, "--plan", "headless.plan"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).starts_with("INVALID step=1 reason="), "{}", stdout(&o));
}

#[test]
fn validate_parse_modes() {
    let tmp = TempDir::new().unwrap();
    let problem = copy_fixture(tmp.path(), GC);
    let text = fs::read_to_string(core_fixture(GC_PLAN)).unwrap();
    let noisy = format!("Here is the plan:\n```\n{}\n```\n", text.lines().enumerate().map(|(i, l)| format!("{}. {l}", i + 1)).collect::<Vec<_>>().join("\n"));
    fs::write(tmp.path().join("noisy.plan"), noisy).unwrap();
    assert_eq!(code(&pstar(tmp.path(), &["validate", "--problem", &problem, "--plan", "noisy.plan"])), 2);
    let o = pstar(tmp.path(), &["validate", "--problem", &problem, "--plan", "noisy.plan", "--lenient"]);
    assert_eq!(stdout(&o).trim(), "VALID len=22");

    let model = copy_fixture(tmp.path(), "grand_challenge_model_output.txt");
    let graph = ["--representation", "graph"];
    let strict: Vec<&str> = [&["validate", "--problem", &problem, "--plan", &model][..], &graph].concat();
    assert_eq!(code(&pstar(tmp.path(), &strict)), 2);
    let lenient: Vec<&str> = [&strict[..], &["--lenient"]].concat();
    let o = pstar(tmp.path(), &lenient);
    assert_eq!((code(&o), stdout(&o).trim().to_string()), (0, "VALID len=22".to_string()));

    let o = pstar(tmp.path(), &["validate", "--problem", &problem, "--plan", &model, "--representation", "pixels"]);
    assert_eq!(code(&o), 2);
}

// --- translate ------------------------------------------------------------

#[test]
fn translate_bw_rand_4_plan() {
    let tmp = TempDir::new().unwrap();
    let plan = copy_fixture(tmp.path(), "bw_rand_4.plan");
    let o = pstar(tmp.path(), &["translate", "--plan", &plan, "--to", "graph"]);
    assert_eq!(code(&o), 0);
    let expected = fs::read_to_string(core_fixture("bw_rand_4_graph_solution.txt")).unwrap();
    assert_eq!(stdout(&o).trim_end(), expected.trim_end());
}

#[test]
fn translate_grand_challenge_problem() {
    let tmp = TempDir::new().unwrap();
    let problem = copy_fixture(tmp.path(), GC);
    let o = pstar(tmp.path(), &["translate", "--problem", &problem, "--to", "graph", "--out", "task.txt"]);
    assert_eq!(code(&o), 0);
    let task = fs::read_to_string(tmp.path().join("task.txt")).unwrap();
    let expected = fs::read_to_string(core_fixture("grand_challenge_graph_task.txt")).unwrap();
    assert_eq!(task.trim_end(), expected.trim_end());

    // Back to Blocksworld: same initial state and goal, so the solver agrees.
    let o = pstar(tmp.path(), &["translate", "--problem", "task.txt", "--to", "blocks", "--out", "back.pddl"]);
    assert_eq!(code(&o), 0);
    let o = pstar(tmp.path(), &["solve", "--problem", "back.pddl"]);
    assert_eq!(stdout(&o).trim(), "c_opt=22 plan_len=22");
    let o = pstar(tmp.path(), &["validate", "--problem", "back.pddl", "--plan", &copy_fixture(tmp.path(), GC_PLAN)]);
    assert_eq!(stdout(&o).trim(), "VALID len=22");
}

fn random_plan(rng: &mut StdRng) -> PlanDoc {
    let len = rng.random_range(0..12);
    PlanDoc::new(
        (0..len)
            .map(|_| {
                let x = b(rng.random_range(1..=40));
                let y = b(rng.random_range(1..=40));
                match rng.random_range(0..4) {
                    0 => Action::PickUp(x),
                    1 => Action::PutDown(x),
                    2 => Action::Stack(x, y),
                    _ => Action::Unstack(x, y),
                }
            })
            .collect(),
    )
}

#[test]
fn translate_round_trip_is_identity() {
    let tmp = TempDir::new().unwrap();
    let mut rng = StdRng::seed_from_u64(17);
    for i in 0..100 {
        let text = emit_plan(&random_plan(&mut rng));
        let src = format!("p{i}.plan");
        fs::write(tmp.path().join(&src), &text).unwrap();
        let o = pstar(tmp.path(), &["translate", "--plan", &src, "--to", "graph", "--out", "g.txt"]);
        assert_eq!(code(&o), 0);
        let o = pstar(tmp.path(), &["translate", "--plan", "g.txt", "--to", "blocks", "--out", "back.plan"]);
        assert_eq!(code(&o), 0);
        assert_eq!(fs::read_to_string(tmp.path().join("back.plan")).unwrap(), text, "plan {i}");
    }
}

#[test]
fn translate_empty_plan_and_mismatch() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("empty.plan"), "").unwrap();
    let o = pstar(tmp.path(), &["translate", "--plan", "empty.plan", "--to", "graph", "--out", "empty.txt"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(tmp.path().join("empty.txt")).unwrap(), "");

    let plan = copy_fixture(tmp.path(), "bw_rand_4.plan");
    let problem = copy_fixture(tmp.path(), "bw_rand_4.pddl");
    assert_eq!(code(&pstar(tmp.path(), &["translate", "--plan", &plan, "--to", "blocks"])), 2);
    assert_eq!(code(&pstar(tmp.path(), &["translate", "--problem", &problem, "--to", "blocks"])), 2);
    assert_eq!(code(&pstar(tmp.path(), &["translate", "--plan", &problem, "--to", "graph"])), 2);
    assert_eq!(code(&pstar(tmp.path(), &["translate", "--to", "graph"])), 2);
}

// --- evaluate -------------------------------------------------------------

fn records(path: &Path) -> Vec<EvalRecord> {
    pstar::harness::read_records(path).unwrap().iter().map(EvalRecord::without_timing).collect()
}

#[test]
fn evaluate_builtin_is_perfect() {
    let tmp = TempDir::new().unwrap();
    let manifest = small_manifest(tmp.path());
    for repr in ["blocksworld", "graph"] {
        let out = format!("{repr}.jsonl");
        let o = pstar(tmp.path(), &["evaluate", "--manifest", &manifest, "--representation", repr, "--out", &out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("valid 5/5"), "{}", stdout(&o));
        let recs = records(&tmp.path().join(&out));
        assert_eq!(recs.len(), 5);
        // Interleaved plans exceed the reported C_opt; every other gap is 0.
        for r in &recs {
            assert!(r.valid, "{r:?}");
            match r.goal_class {
                GoalClass::Interleaved => assert!(r.gap.unwrap().to_f64() > 0.0),
                _ => assert!(r.gap.unwrap().is_zero(), "{r:?}"),
            }
        }
    }
}

#[test]
fn evaluate_resumes_to_the_same_record_set() {
    let tmp = TempDir::new().unwrap();
    let manifest = small_manifest(tmp.path());
    let run = |out: &str| pstar(tmp.path(), &["evaluate", "--manifest", &manifest, "--out", out]);
    assert_eq!(code(&run("full.jsonl")), 0);

    assert_eq!(code(&run("part.jsonl")), 0);
    let text = fs::read_to_string(tmp.path().join("part.jsonl")).unwrap();
    let kept: Vec<&str> = text.lines().take(2).collect();
    fs::write(tmp.path().join("part.jsonl"), kept.join("\n") + "\n").unwrap();

    let o = run("part.jsonl");
    assert!(stdout(&o).contains("evaluated 3, skipped 2"), "{}", stdout(&o));
    assert_eq!(records(&tmp.path().join("part.jsonl")), records(&tmp.path().join("full.jsonl")));

    let o = run("part.jsonl");
    assert!(stdout(&o).contains("evaluated 0, skipped 5"));
    assert_eq!(records(&tmp.path().join("part.jsonl")).len(), 5);
}

#[test]
fn evaluate_records_producer_failures() {
    let tmp = TempDir::new().unwrap();
    let manifest = small_manifest(tmp.path());
    fs::write(
        tmp.path().join("failing.toml"),
        "kind = \"external_command\"\nid = \"failing\"\ncommand = [\"sh\", \"-c\", \"echo nope; exit 3\"]\ntimeout_secs = 10\n",
    )
    .unwrap();
    let o = pstar(
        tmp.path(),
        &["--format", "json", "evaluate", "--manifest", &manifest, "--producer-config", "failing.toml", "--out", "f.jsonl"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!((v["records"].clone(), v["valid"].clone()), (5.into(), 0.into()));
    assert!(records(&tmp.path().join("f.jsonl")).iter().all(|r| !r.valid && r.failure.is_some()));
}

#[test]
fn evaluate_config_errors_exit_1() {
    let tmp = TempDir::new().unwrap();
    let manifest = small_manifest(tmp.path());
    let configs = [
        ("nourl.toml", "kind = \"http_endpoint\"\nmodel = \"m\"\n"),
        ("extra.toml", "kind = \"builtin_optimal\"\napi_key = \"do-not-store\"\n"),
        ("zero.toml", "kind = \"builtin_optimal\"\nparallelism = 0\n"),
        ("garbage.toml", "kind = [\n"),
    ];
    for (name, text) in configs {
        fs::write(tmp.path().join(name), text).unwrap();
        let o = pstar(tmp.path(), &["evaluate", "--manifest", &manifest, "--producer-config", name, "--out", "x.jsonl"]);
        assert_eq!(code(&o), 1, "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!tmp.path().join("x.jsonl").exists());
}

// --- report ---------------------------------------------------------------

fn record(id: &str, curriculum: &str, producer: &str, c_opt: u64, plan_length: Option<u64>, tokens: Option<u64>) -> EvalRecord {
    EvalRecord {
        schema_version: SCHEMA_VERSION,
        instance_id: id.into(),
        curriculum: curriculum.into(),
        producer: producer.into(),
        representation: Representation::Blocksworld,
        goal_class: GoalClass::Standard,
        complexity_axis: c_opt,
        raw_output: String::new(),
        parse_mode: None,
        valid: plan_length.is_some(),
        plan_length,
        c_opt,
        gap: plan_length.map(|l| optimality_gap(l, c_opt)),
        thinking_tokens: tokens,
        wall_time_ms: 0,
        failure: plan_length.is_none().then(|| "no plan".into()),
    }
}

fn write_records(path: &Path, recs: &[EvalRecord]) {
    let text: String = recs.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    fs::write(path, text).unwrap();
}

#[test]
fn report_gaps_and_missing_tokens() {
    let tmp = TempDir::new().unwrap();
    write_records(
        &tmp.path().join("r.jsonl"),
        &[record("a", "gc", "p", 108, Some(108), None), record("b", "gc", "p", 108, Some(116), None)],
    );
    let o = pstar(tmp.path(), &["report", "--records", "r.jsonl", "--out", "rep"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("optimal rate  50% (1/2)"), "{text}");
    assert!(text.contains("gap min/median/max  0.0000 / 0.0370 / 0.0741"), "{text}");
    assert!(text.contains("tokens per step: insufficient data"), "{text}");
    assert_eq!(fs::read_to_string(tmp.path().join("rep/summary.txt")).unwrap(), text);
    let csv = fs::read_to_string(tmp.path().join("rep/plot.csv")).unwrap();
    assert_eq!(csv, "complexity_axis,c_opt,plan_length,valid,thinking_tokens\n108,108,108,true,\n108,108,116,true,\n");

    let o = pstar(tmp.path(), &["--format", "json", "report", "--records", "r.jsonl"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["groups"][0]["optimal_rate"], 0.5);
    assert!((v["groups"][0]["gap_max"].as_f64().unwrap() - 8.0 / 108.0).abs() < 1e-12);
    assert!(v["fit"].is_null());
}

#[test]
fn report_fits_tokens_per_step() {
    let tmp = TempDir::new().unwrap();
    let recs: Vec<EvalRecord> = (1..=10)
        .map(|k| record(&format!("i{k}"), "harvest", "p", 20 * k, Some(20 * k), Some(47 * 20 * k + 100)))
        .collect();
    write_records(&tmp.path().join("r.jsonl"), &recs);
    let o = pstar(tmp.path(), &["report", "--records", "r.jsonl"]);
    assert!(stdout(&o).contains("tokens per step: slope 47.000, intercept 100.000, r2 1.0000, n 10"), "{}", stdout(&o));
    assert_eq!(code(&pstar(tmp.path(), &["report", "--records", "missing.jsonl"])), 1);
}

/// Reference grand-challenge outcomes for three producers, replayed as records.
#[test]
fn report_on_reference_grand_challenge_results() {
    let table = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/grand_challenge_results.csv")).unwrap();
    let mut recs = Vec::new();
    for row in table.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        let c_opt: u64 = f[4].parse().unwrap();
        let id = format!("grand_challenge/w{:03}", f[0].parse::<u32>().unwrap());
        let len = |s: &str| s.parse::<u64>().ok();
        recs.push(record(&id, "grand_challenge", "lama", c_opt, len(f[5]), None));
        for (producer, length, mark) in [("gemini_bw", f[6], f[7]), ("gemini_graph", f[8], f[9])] {
            // Only starred rows are valid; a length next to a cross is an invalid plan.
            let mut r = record(&id, "grand_challenge", producer, c_opt, (mark == "star").then(|| len(length).unwrap()), None);
            if mark != "star" {
                r.plan_length = len(length);
            }
            recs.push(r);
        }
    }
    assert_eq!(recs.len(), 99);
    let tmp = TempDir::new().unwrap();
    write_records(&tmp.path().join("gc.jsonl"), &recs);
    let o = pstar(tmp.path(), &["report", "--records", "gc.jsonl"]);
    let text = stdout(&o);
    let block = |producer: &str| -> String {
        let start = text.find(&format!("| {producer} |")).unwrap();
        text[start..].lines().take(5).collect::<Vec<_>>().join("\n")
    };
    let bw = block("gemini_bw");
    assert!(bw.contains("success rate  48.5% (16/33)") && bw.contains("optimal rate  100% (16/16)"), "{bw}");
    let graph = block("gemini_graph");
    assert!(graph.contains("success rate  42.4% (14/33)") && graph.contains("optimal rate  100% (14/14)"), "{graph}");
    let lama = block("lama");
    assert!(lama.contains("success rate  21.2% (7/33)"), "{lama}");
    assert!(lama.contains("optimal rate  85.7% (6/7)"), "{lama}");
    assert!(lama.contains("/ 0.0741"), "{lama}");
}
