//! Scenario-driven front end for the dark-evolution simulator.
//!
//! A scenario file names a system, a monitored path and a run; the runner
//! executes it and writes a trajectory CSV plus a JSON report.

pub mod runner;
pub mod scenario;

pub use runner::{design, run_scenario, run_sweep, spectrum, Options, RunReport};
pub use scenario::Scenario;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] zeno_dark_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for malformed input, 3 for physically invalid input, 1 for
    /// failures writing results.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_physics() => 3,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}
