//! Batch driver: designs filter banks, runs reconstruction experiments and
//! order sweeps from a JSON configuration.

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
