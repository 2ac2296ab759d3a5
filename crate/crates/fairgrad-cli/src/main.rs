//! Experiment driver for α-fair multi-task gradient aggregation.
//!
//! Subcommands: `run` (one experiment → trajectory.csv + summary.json),
//! `sweep` (one run per α, concurrently), `checkgrad` (finite-difference
//! gradient validation), `metrics` (Δm% and mean rank from a results
//! table). Exit codes: 0 success/stationary, 1 usage or config error,
//! 2 non-convergence (budget exhausted, solver failure, failed check).

mod commands;
mod output;
mod problems;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use fairgrad::types::{Method, PcgradReduce, SolverMode, StepRule};

#[derive(Parser)]
#[command(
    name = "fairgrad",
    version,
    about = "Multi-task gradient aggregation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment; writes trajectory.csv and summary.json.
    Run(RunArgs),
    /// Run the experiment once per alpha value, concurrently.
    Sweep(SweepArgs),
    /// Compare analytic gradients against central differences.
    Checkgrad(CheckgradArgs),
    /// Compute delta-m% and mean rank from a results table CSV.
    Metrics(MetricsArgs),
}

#[derive(Args)]
pub struct ProblemArgs {
    /// Benchmark problem: toy or quadratics.
    #[arg(long)]
    pub problem: String,
    /// Named start for the toy problem (p1..p5); defaults to p1.
    #[arg(long)]
    pub start: Option<String>,
    /// Task count for the quadratics problem.
    #[arg(long, default_value_t = 2)]
    pub tasks: usize,
    /// Parameter dimension for the quadratics problem.
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Spectral condition bound for the quadratics problem.
    #[arg(long, default_value_t = 10.0)]
    pub cond: f64,
}

/// Per-field overrides applied on top of the config file (flags win).
#[derive(Args)]
pub struct ConfigOverrides {
    /// JSON config file; flat field names mirror the library config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fairness level alpha (0 recovers plain gradient summation).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Aggregation method: fairgrad, ls, si, rlw, dwa, mgda, pcgrad.
    #[arg(long)]
    pub method: Option<Method>,
    /// Step rule: fixed, theoretical, adaptive_moment.
    #[arg(long = "step-rule")]
    pub step_rule: Option<StepRule>,
    /// Learning rate for the fixed and adaptive_moment rules.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Maximum number of parameter updates.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Stationarity tolerance for termination.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Compute the stationarity measure every N steps.
    #[arg(long = "check-every")]
    pub check_every: Option<usize>,
    /// RNG seed (flag > config file > FAIRGRAD_SEED > 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lower clamp for the fairness weights.
    #[arg(long = "w-min")]
    pub w_min: Option<f64>,
    /// Weight-equation solver: least_squares or sgd_inner.
    #[arg(long = "solver-mode")]
    pub solver_mode: Option<SolverMode>,
    /// Residual tolerance factor (scaled by the task count).
    #[arg(long = "solver-tol-factor")]
    pub solver_tol_factor: Option<f64>,
    /// Apply the alpha-fair loss rescale before aggregation (<= 1; 1 = log).
    #[arg(long = "fair-loss-alpha")]
    pub fair_loss_alpha: Option<f64>,
    /// Clamp losses below at this floor before aggregation.
    #[arg(long = "loss-floor")]
    pub loss_floor: Option<f64>,
    /// Reduction for projected gradients: mean or sum.
    #[arg(long = "pcgrad-reduce")]
    pub pcgrad_reduce: Option<PcgradReduce>,
    /// Softmax temperature for the loss-ratio weighting baseline.
    #[arg(long = "dwa-temperature")]
    pub dwa_temperature: Option<f64>,
    /// Gradient smoothness constant for the theoretical step rule.
    #[arg(long)]
    pub smoothness: Option<f64>,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub problem_args: ProblemArgs,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
    /// Explicit initial point, comma-separated (overrides --start and file).
    #[arg(long)]
    pub x0: Option<String>,
    /// Output directory for trajectory.csv and summary.json.
    #[arg(long, default_value = "fairgrad_out")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated alpha values, e.g. `1,2,5,10`.
    #[arg(long)]
    pub alphas: String,
    /// Evaluate the aggregation at the start point only (no updates).
    #[arg(long = "static")]
    pub static_mode: bool,
}

#[derive(Args)]
pub struct CheckgradArgs {
    #[command(flatten)]
    pub problem_args: ProblemArgs,
    /// Number of sample points.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// RNG seed (flag > FAIRGRAD_SEED > 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Test hook: corrupt one gradient entry so the check must fail.
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Args)]
pub struct MetricsArgs {
    /// Results table CSV (`method,...` header plus a `direction,...` row).
    #[arg(long)]
    pub table: PathBuf,
    /// Baseline method row for delta-m% and ranking.
    #[arg(long)]
    pub baseline: String,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            std::process::exit(code);
        }
    };
    let code = match &cli.command {
        Command::Run(args) => commands::cmd_run(args),
        Command::Sweep(args) => commands::cmd_sweep(args),
        Command::Checkgrad(args) => commands::cmd_checkgrad(args),
        Command::Metrics(args) => commands::cmd_metrics(args),
    };
    std::process::exit(code);
}
