//! Command-line frontend: timestamp ingestion, estimation, simulation and
//! Monte Carlo experiments.

pub mod args;
pub mod commands;
pub mod failure;
pub mod ingest;
pub mod keyvalue;
pub mod modelfile;
pub mod output;

use args::{Cli, Command};
use failure::CliResult;

/// Runs one command and returns the text for stdout.
pub fn run(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Experiment(a) => commands::experiment(a),
    }
}

/// Sizes the global thread pool from `LEADLAG_THREADS` (unset or 0: one per core).
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("LEADLAG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| failure::Failure::usage(format!("LEADLAG_THREADS must be a non-negative integer, got '{v}'")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| failure::Failure::usage(e.to_string()))?;
    }
    Ok(())
}
