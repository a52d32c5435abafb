//! Experiment driver behind the `graphdep` binary: JSON experiment configs,
//! the subcommands, and their reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::{ExperimentConfig, Law};
pub use error::{CliError, CliResult};
