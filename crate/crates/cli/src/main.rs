//! `hbrom`: simulate, reduce, train, predict and report.

mod predict;
mod reduce;
mod report;
mod simulate;
mod train;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hbrom::Error;

#[derive(Parser)]
#[command(name = "hbrom", version, about = "Reduced-order modeling with heavy-ball neural ODEs")]
struct Cli {
    /// Seed for every randomized step (initialization, batching, sampling).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Machine-readable JSON on stdout instead of tables.
    #[arg(long, global = true)]
    json: bool,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full-order solver and write a snapshot file.
    Simulate(simulate::SimulateArgs),
    /// POD or lifted DMD of a snapshot file.
    Reduce(reduce::ReduceArgs),
    /// Train a latent ODE model on reduced coefficients.
    Train(train::TrainArgs),
    /// Roll a trained model forward from a seed window.
    Predict(predict::PredictArgs),
    /// Compare training runs.
    Report(report::ReportArgs),
}

/// What went wrong, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Core(e) if e.is_instability() => 3,
            Failure::Core(Error::Convergence { .. }) => 3,
            Failure::Core(Error::Divergence { .. } | Error::GradientExplosion(_)) => 4,
            Failure::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => e.fmt(f),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Fails with a usage error naming `path` unless it exists.
pub fn require(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} not found: {}", path.display())))
    }
}

pub fn create_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Failure::Core(e.into())),
        _ => Ok(()),
    }
}

/// Sorted files in `dir` whose names end with `suffix`.
pub fn files_with_suffix(dir: &Path, suffix: &str) -> CliResult<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::Core(e.into()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(suffix)))
        .collect();
    out.sort();
    Ok(out)
}

pub struct Ctx {
    pub seed: Option<u64>,
    pub json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    let ctx = Ctx { seed: cli.seed, json: cli.json };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate::run(&ctx, a),
        Command::Reduce(a) => reduce::run(&ctx, a),
        Command::Train(a) => train::run(&ctx, a),
        Command::Predict(a) => predict::run(&ctx, a),
        Command::Report(a) => report::run(&ctx, a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
