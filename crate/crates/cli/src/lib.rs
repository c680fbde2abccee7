//! Batch front end: training, evaluation, comparisons, reward sweeps,
//! gradient checks and gait diagrams, all writing CSV under one output
//! directory.

pub mod commands;
pub mod config;
pub mod output;
pub mod summary;

pub use config::{parse_seeds, parse_selector, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] apex::ApexError),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Version string recorded in run manifests.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));
