use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use logdrift::Horizon;
use serde::Deserialize;

mod logs;
mod monitor;
mod sim;
mod support;

use support::{CmdResult, Settings};

/// Log template drift monitoring.
///
/// Exit codes: 0 success, 2 input or format error, 3 invariant violation,
/// 4 detection (only with `monitor --exit-on-detect`).
#[derive(Debug, Parser)]
#[command(name = "logdrift", version)]
struct Cli {
    /// JSON object of default flag values (keys are long flag names with
    /// underscores). Flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random draw (overrides the scenario seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,

    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine a template set from training logs.
    Templates(TemplatesArgs),
    /// Convert raw logs into per-window count vectors.
    Vectors(VectorsArgs),
    /// Chi-squared test that a sample of count vectors shares one multinomial.
    Fit(FitArgs),
    /// Run the windowed Bayes factor detector over a stream.
    Monitor(MonitorArgs),
    /// Simulate contamination scenarios and record detection windows.
    Simulate(SimulateArgs),
    /// Summarise detection windows as TPR/FPR/FNR/ADD.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormatArg {
    Text,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorFormatArg {
    Csv,
    Jsonl,
}

impl From<VectorFormatArg> for logdrift::io::VectorFormat {
    fn from(f: VectorFormatArg) -> Self {
        match f {
            VectorFormatArg::Csv => logdrift::io::VectorFormat::Csv,
            VectorFormatArg::Jsonl => logdrift::io::VectorFormat::Jsonl,
        }
    }
}

#[derive(Debug, Args)]
pub struct LogArgs {
    /// Raw log layout.
    #[arg(long, value_enum)]
    log_format: Option<LogFormatArg>,

    /// Regex with named groups `ts` and `msg` for text logs.
    #[arg(long)]
    log_pattern: Option<String>,

    /// Regex stripped from the start of each message (repeatable).
    #[arg(long = "prefix-rule")]
    prefix_rules: Vec<String>,

    /// Timestamp masking regex (repeatable; replaces the defaults).
    #[arg(long = "mask")]
    masks: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TemplatesArgs {
    /// Training logs ("-" for stdin).
    #[arg(long, short)]
    input: Option<PathBuf>,

    /// Template set JSON destination (stdout when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,

    /// Token agreement ratio needed to merge a line into a template.
    #[arg(long)]
    threshold: Option<f64>,

    /// Error keyword for routing unmatched lines (repeatable).
    #[arg(long = "error-keyword")]
    error_keywords: Vec<String>,

    /// Also write the mining report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,

    #[command(flatten)]
    log: LogArgs,
}

#[derive(Debug, Args)]
pub struct VectorsArgs {
    #[arg(long, short)]
    input: Option<PathBuf>,

    /// Template set JSON.
    #[arg(long)]
    templates: PathBuf,

    #[arg(long, short)]
    output: Option<PathBuf>,

    /// Output format (defaults to the output extension, then CSV).
    #[arg(long, value_enum)]
    format: Option<VectorFormatArg>,

    /// Window width in seconds.
    #[arg(long)]
    width: Option<f64>,

    /// Fail with exit code 3 if any line misses every template.
    #[arg(long)]
    training: bool,

    #[command(flatten)]
    log: LogArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Raw integer count vectors (CSV or JSONL).
    #[arg(long, short)]
    input: Option<PathBuf>,

    #[arg(long, value_enum)]
    format: Option<VectorFormatArg>,

    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    /// Evidence window size, or "inf".
    #[arg(long)]
    window: Option<Horizon>,

    #[arg(long)]
    kappa_count: Option<f64>,

    #[arg(long)]
    kappa_prior: Option<f64>,

    #[arg(long)]
    epsilon: Option<f64>,

    /// Significance level; the threshold is ln(1/alpha).
    #[arg(long)]
    alpha: Option<f64>,

    /// Grace period in windows.
    #[arg(long)]
    grace: Option<u64>,

    /// Log prior odds.
    #[arg(long)]
    b0: Option<f64>,

    /// Report the evidence of the window before the current vector.
    #[arg(long)]
    lag_compat: bool,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    /// Count vectors, or raw logs with --logs ("-" for stdin).
    #[arg(long, short)]
    input: Option<PathBuf>,

    /// Treat the input as raw logs (requires --templates).
    #[arg(long)]
    logs: bool,

    #[arg(long)]
    templates: Option<PathBuf>,

    /// Baseline: JSON {"alpha": [...]} or {"probs": [...]}, or a file of
    /// training count vectors.
    #[arg(long)]
    prior: Option<PathBuf>,

    #[arg(long, value_enum)]
    format: Option<VectorFormatArg>,

    /// Window width in seconds for raw logs.
    #[arg(long)]
    width: Option<f64>,

    #[command(flatten)]
    detector: DetectorArgs,

    /// Exit with code 4 at the first flagged window.
    #[arg(long)]
    exit_on_detect: bool,

    /// Resume from a saved detector state.
    #[arg(long)]
    checkpoint_in: Option<PathBuf>,

    /// Save the detector state when the run ends.
    #[arg(long)]
    checkpoint_out: Option<PathBuf>,

    #[arg(long, short)]
    output: Option<PathBuf>,

    #[command(flatten)]
    log: LogArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON.
    #[arg(long)]
    scenario: Option<PathBuf>,

    /// Normal count vector pool.
    #[arg(long, requires = "pool_a", conflicts_with = "synthetic")]
    pool_n: Option<PathBuf>,

    /// Anomalous count vector pool.
    #[arg(long, requires = "pool_n")]
    pool_a: Option<PathBuf>,

    /// Generate pools instead of reading them.
    #[arg(long)]
    synthetic: bool,

    /// Synthetic pools: number of templates K.
    #[arg(long)]
    synthetic_templates: Option<usize>,

    /// Synthetic pools: templates carrying normal traffic.
    #[arg(long)]
    normal_support: Option<usize>,

    /// Synthetic pools: templates shared by normal and anomalous traffic.
    #[arg(long)]
    overlap: Option<usize>,

    /// Synthetic pools: lines per window.
    #[arg(long)]
    draws: Option<u64>,

    /// Synthetic pools: vectors per pool.
    #[arg(long)]
    pool_size: Option<usize>,

    /// Write one trace JSONL per repetition into this directory.
    #[arg(long)]
    emit_traces: Option<PathBuf>,

    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Detections JSONL ({"r":..,"d":..} per line).
    #[arg(long, short)]
    input: Option<PathBuf>,

    /// Contamination start; taken from --scenario when omitted.
    #[arg(long)]
    t_s: Option<u64>,

    #[arg(long)]
    grace: Option<u64>,

    #[arg(long)]
    scenario: Option<PathBuf>,

    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Shared flags every command can read.
pub struct Context {
    pub settings: Settings,
    pub seed: Option<u64>,
    pub quiet: bool,
    pub verbose: bool,
}

impl Context {
    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn debug(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn dispatch(cli: Cli) -> CmdResult {
    let ctx = Context {
        settings: Settings::load(cli.config.as_deref())?,
        seed: cli.seed,
        quiet: cli.quiet,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Templates(a) => logs::templates(&ctx, a),
        Command::Vectors(a) => logs::vectors(&ctx, a),
        Command::Fit(a) => monitor::fit(&ctx, a),
        Command::Monitor(a) => monitor::monitor(&ctx, a),
        Command::Simulate(a) => sim::simulate(&ctx, a),
        Command::Eval(a) => sim::eval(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
