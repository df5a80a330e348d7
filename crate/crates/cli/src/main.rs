//! `crowdbelief` command-line front end.
//!
//! Exit codes: 0 on success, 2 for I/O failures and command-line usage
//! errors, 3 for model or data errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crowdbelief::Error;

#[derive(Parser, Debug)]
#[command(
    name = "crowdbelief",
    version,
    about = "Calibrated crowd beliefs from expert probability forecasts"
)]
struct Cli {
    /// File of key=value lines naming long flags; flags on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for internal parallelism.
    #[arg(long, global = true, env = "CROWDBELIEF_THREADS", default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic data sets, or run the synthetic study with --study.
    Synth(SynthArgs),
    /// Fit a model or baseline to resolved questions.
    Fit(FitArgs),
    /// Aggregate questions with a fitted model or baseline.
    Aggregate(AggregateArgs),
    /// Cross-validate aggregators and write score, summary and reliability tables.
    Evaluate(EvaluateArgs),
    /// Split questions into two day-balanced halves with one outcome each.
    Balance(BalanceArgs),
    /// Scale, bias ordering and per-question difficulty of a fit.
    ReportCalibration(ReportArgs),
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Forecast CSV: question_id,expert_id,day,prob,expertise.
    #[arg(long)]
    pub forecasts: PathBuf,
    /// Outcome CSV: question_id,horizon,outcome.
    #[arg(long)]
    pub outcomes: PathBuf,
    /// Number of expertise groups [default: largest level in the forecasts].
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub censor_lo: f64,
    #[arg(long, default_value_t = 0.99)]
    pub censor_hi: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SamplerArgs {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// 1-based group whose bias is pinned to 1 [default: last group].
    #[arg(long)]
    pub ref_group: Option<usize>,
    /// Use 1/s^2 variance priors instead of 1/s^4.
    #[arg(long)]
    pub jeffreys: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Sac,
    Sdlm,
    Bsac,
    Ewma,
    Ewmla,
    Ewmba,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Log,
    Brier,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Days per question, including the resolution day.
    #[arg(long = "T", default_value_t = 101)]
    pub horizon: usize,
    /// Questions per data set (comma-separated list for a grid).
    #[arg(long = "K", value_delimiter = ',', default_value = "20")]
    pub questions: Vec<usize>,
    /// Forecast noise variance (list for a grid).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub sigma2: Vec<f64>,
    /// Common bias multiplier (list for a grid).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub experts: usize,
    /// Data sets per grid cell.
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    /// Use the full 5 x 5 x 5 grid with 40 data sets per cell.
    #[arg(long)]
    pub paper_grid: bool,
    /// Fit SAC and EWMA to every data set and write losses instead of data.
    #[arg(long)]
    pub study: bool,
    #[arg(long, default_value_t = 200)]
    pub iterations: usize,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 3)]
    pub ref_group: usize,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, value_enum, default_value_t = Model::Sac)]
    pub model: Model,
    #[arg(long, value_enum, default_value_t = Rule::Log)]
    pub rule: Rule,
    /// Balance outcomes before fitting.
    #[arg(long)]
    pub balance: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct AggregateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, value_enum)]
    pub method: Model,
    /// Directory written by `fit`; baselines fall back to default parameters without it.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Smoothing weight for baselines run without a fit.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Estimate every day from its own prefix, as a real-time forecaster would.
    #[arg(long)]
    pub sequential: bool,
    /// First day written.
    #[arg(long, default_value_t = 1)]
    pub first_day: usize,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Required for model-based methods.
    #[arg(long, required_if_eq_any([("method", "sac"), ("method", "sdlm"), ("method", "bsac")]))]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Comma-separated methods [default: all].
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub agg_iterations: Option<usize>,
    #[arg(long)]
    pub agg_burn_in: Option<usize>,
    #[arg(long)]
    pub agg_thin: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub first_day: usize,
    /// Balance outcomes before splitting into folds.
    #[arg(long)]
    pub balance: bool,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, default_value_t = 1000)]
    pub boot: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Method shown in reliability.csv [default: SAC-LOG when evaluated, else the first method].
    #[arg(long)]
    pub reliability_method: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct BalanceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    /// Forecast CSV of the fitted data, for the difficulty table.
    #[arg(long, requires = "outcomes")]
    pub forecasts: Option<PathBuf>,
    #[arg(long, requires = "forecasts")]
    pub outcomes: Option<PathBuf>,
    #[arg(long)]
    pub groups: Option<usize>,
    /// Output directory [default: the fit directory].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn hint(e: &Error) -> Option<&'static str> {
    match e {
        Error::Separation(_) => Some("the scale needs resolved questions with both outcomes; add questions or pass --balance"),
        Error::EmptyGroup { .. } => Some("pass --groups with the number of groups actually present, or --model sdlm"),
        Error::ImproperConditional { .. } => Some("a question has too little spread for the default priors; try --jeffreys"),
        _ => None,
    }
}

fn main() -> ExitCode {
    let args = match config::merge(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("error: cannot start the thread pool: {e}");
        return ExitCode::from(3);
    }
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Fit(a) => commands::fit(a),
        Command::Aggregate(a) => commands::aggregate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Balance(a) => commands::balance(a),
        Command::ReportCalibration(a) => commands::report_calibration(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(h) = hint(&e) {
                eprintln!("hint: {h}");
            }
            ExitCode::from(if e.is_io() { 2 } else { 3 })
        }
    }
}
