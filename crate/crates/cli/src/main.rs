//! `hetflow` command-line front end.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "hetflow",
    version,
    about = "String stability of heterogeneous IDM traffic"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scenario file (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: scenario `out`, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the integration step (s).
    #[arg(long, global = true)]
    dt: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-vehicle and per-pair string-stability report.
    Analyze,
    /// Nonlinear simulation of the configured disturbances.
    Simulate,
    /// Tune automated vehicles, alone or in a mixed-traffic experiment.
    Optimize(commands::OptimizeArgs),
    /// Spectrum of the chain closed into a ring.
    Ring,
    /// Draw vehicles from the parameter distribution.
    Sample(commands::SampleArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Compute(e.to_string()))?;
    }
    let ctx = commands::Context::load(&cli.global)?;
    match cli.command {
        Command::Analyze => commands::analyze(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Optimize(args) => commands::optimize(ctx, &args),
        Command::Ring => commands::ring(&ctx),
        Command::Sample(args) => commands::sample(&ctx, &args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
