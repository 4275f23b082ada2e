//! `pstar`: generate, solve, validate, translate, evaluate and report.

mod cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "pstar", version, about = "P* Blocksworld benchmark engine")]
struct Cli {
    /// Master seed; only generation draws randomness, but every subcommand accepts it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output format for the summary printed on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Graph,
    Blocks,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a curriculum of problems plus a manifest.
    Generate(GenerateArgs),
    /// Write the analytic (or searched) optimal plan for a problem.
    Solve(SolveArgs),
    /// Check a plan against a problem.
    Validate(ValidateArgs),
    /// Convert a problem or plan between Blocksworld and graph text.
    Translate(TranslateArgs),
    /// Run a producer over a manifest, appending to a results file.
    Evaluate(EvaluateArgs),
    /// Summarize a results file.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Preset: high_towers, harvest, interleaved_harvest, grand_challenge.
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    pub curriculum: Option<String>,
    /// Custom schedule (TOML or JSON) with `name` and `steps`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Output directory; defaults to `out/<curriculum>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = pstar::generator::DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u32,
    /// Drop schedule steps whose h_min exceeds this.
    #[arg(long)]
    pub max_h_min: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// Breadth-first search instead of the closed-form construction.
    #[arg(long)]
    pub oracle: bool,
    /// Plan file; defaults to the problem path with a `.plan` extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_states: usize,
    #[arg(long, default_value_t = 60)]
    pub max_time_secs: u64,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    /// Accept free-form model output (fences, numbering, case).
    #[arg(long)]
    pub lenient: bool,
    /// Plan vocabulary: `blocksworld` actions or graph operators.
    #[arg(long, default_value = "blocksworld")]
    pub representation: String,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["problem", "plan"])))]
pub struct TranslateArgs {
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub to: Target,
    /// Destination file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Problem name used when translating a graph problem back.
    #[arg(long, default_value = "translated")]
    pub name: String,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Producer description (TOML); the built-in optimal producer when absent.
    #[arg(long)]
    pub producer_config: Option<PathBuf>,
    #[arg(long, default_value = "blocksworld")]
    pub representation: String,
    /// Results file (JSON lines). Existing records are kept and skipped.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub records: PathBuf,
    /// Directory for `summary.txt` and `plot.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Bad input from the caller; exits with 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = cmd::Ctx { seed: cli.seed, format: cli.format };
    let result = match cli.command {
        Command::Generate(a) => cmd::generate(&ctx, a),
        Command::Solve(a) => cmd::solve(&ctx, a),
        Command::Validate(a) => cmd::validate(&ctx, a),
        Command::Translate(a) => cmd::translate(&ctx, a),
        Command::Evaluate(a) => cmd::evaluate(&ctx, a),
        Command::Report(a) => cmd::report(&ctx, a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
