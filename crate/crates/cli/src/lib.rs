//! Experiment runner for the Poisson-space inequality engine: TOML configs in,
//! deterministic tab-separated report records out.

pub mod config;
pub mod error;
pub mod example_cmd;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use runner::{execute, run_file, Overrides, RunOutcome};
