//! Command-line front end for `blockg`: model fitting from CSV files,
//! prediction, and the simulation studies.

pub mod args;
pub mod clp;
pub mod config;
pub mod data;
pub mod error;
pub mod fit;
pub mod grid;
pub mod predict;
pub mod settings;

use std::path::PathBuf;

use args::{Cli, Command};
use error::{CliError, Result};

/// Version of the JSON summaries written next to the CSV outputs.
pub const SCHEMA_VERSION: u32 = 1;

/// Runs `f` on a rayon pool sized by `BLOCKG_THREADS` (all cores when unset).
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("BLOCKG_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("BLOCKG_THREADS must be a count, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Dispatches a parsed command line; returns the output directory.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    match &cli.command {
        Command::Fit(a) => fit::cmd_fit(a),
        Command::SimulateClp(a) => clp::cmd_simulate_clp(a),
        Command::SimulateGrid(a) => grid::cmd_simulate_grid(a),
        Command::Predict(a) => predict::cmd_predict(a),
    }
}
