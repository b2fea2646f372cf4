use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

use commands::{ScaleName, StatName, TailMethod};
use covol_core::verify::{Level, DEFAULT_SEED};

/// Realized covolatility estimators, deviation rate functions and their Monte Carlo checks.
#[derive(Debug, Parser)]
#[command(name = "covol", version = covol_core::VERSION)]
struct Cli {
    /// Worker threads for Monte Carlo; results do not depend on it.
    #[arg(long, global = true, env = "COVOL_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate sample paths and write them as CSV.
    Simulate(SimulateArgs),
    /// Realized vector, correlation and betas of a CSV path.
    Estimate(EstimateArgs),
    /// Evaluate a rate function.
    Rate(RateArgs),
    /// Monte Carlo tail probability with its predicted rate.
    Tail(TailArgs),
    /// Run the acceptance battery.
    Verify(VerifyArgs),
    /// Sample covariance of √n(V₁ⁿ − [V]₁) against Σ₁.
    Covcheck(CovcheckArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; with --paths > 1 the path index is appended to the file stem.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV with header t,x1,x2.
    #[arg(long)]
    pub path: PathBuf,
    /// Time at which the estimators are read off.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Spec whose drift is removed for the drift-corrected vector.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// JSON query: {"x": [...]} or {"u": ..., "statistic": ..., "scale": ...}.
    #[arg(long, conflicts_with_all = ["x", "u"])]
    pub query: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', num_args = 1, allow_negative_numbers = true, conflicts_with = "u")]
    pub x: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true, requires = "statistic")]
    pub u: Option<f64>,
    #[arg(long, value_enum)]
    pub statistic: Option<StatName>,
    #[arg(long, value_enum, default_value = "ldp")]
    pub scale: ScaleName,
}

#[derive(Debug, Args)]
pub struct TailArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// JSON {"event": ..., "n": ..., "paths": ..., "scale": ...}.
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: TailMethod,
    /// Strictly increasing interval counts for an empirical rate curve.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub curve: Option<Vec<usize>>,
    #[arg(long, requires = "curve")]
    pub curve_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Spec for extra consistency checks next to the battery.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value = "quick", value_parser = parse_level)]
    pub level: Level,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Comma-separated criterion ids; all by default.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub only: Option<Vec<u8>>,
    /// CSV of the exact-law rate curve behind the scalar LDP criterion.
    #[arg(long)]
    pub curve_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CovcheckArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse().map_err(|e: covol_core::CovolError| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(commands::EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(commands::EXIT_VALIDATION);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: could not start the worker pool: {e}");
            return ExitCode::from(commands::EXIT_VALIDATION);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Rate(a) => commands::rate(a),
        Command::Tail(a) => commands::tail(a),
        Command::Verify(a) => commands::verify(a),
        Command::Covcheck(a) => commands::covcheck(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::exit_code(&e)
        }
    }
}
