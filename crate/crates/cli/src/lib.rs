//! Experiment harness for the `glbai` command: seeded replications of GLGapE
//! and GapE on synthetic or file-backed instances, parameter sweeps and paired
//! comparisons, written as CSV plus JSON summaries.

pub mod config;
pub mod experiment;
pub mod stats;

pub use config::{Algorithm, ExperimentConfig, SweepAxis};
pub use experiment::{cmd_compare, cmd_run, cmd_sweep, run_all, run_replication, InstanceSource, Outcome, RunRow};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}
