//! Command-line front end for the `apids` spectral pipeline.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

pub use commands::{run, Command, RunOptions};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] apids::Error),

    #[error("invalid configuration: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status.
    pub fn code(&self) -> i32 {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Parse(_) => 2,
            CliError::Io { .. } => 10,
        }
    }
}

impl From<CliError> for apids::Error {
    fn from(e: CliError) -> Self {
        match e {
            CliError::Core(e) => e,
            other => apids::Error::Config(other.to_string()),
        }
    }
}
