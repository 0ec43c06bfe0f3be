//! CLI error type with the process exit codes it maps to.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration or protocol preconditions (exit code 2).
    #[error("configuration error: {0}")]
    Config(String),

    /// Numerical-conditioning abort, e.g. a broken phase chain (exit code 3).
    #[error("conditioning abort: {0}")]
    Conditioning(imager_core::Error),

    /// Filesystem failure (exit code 4).
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Malformed input file (exit code 4).
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Any other failure from the imaging library (exit code 1).
    #[error(transparent)]
    Core(imager_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Conditioning(_) => 3,
            CliError::Io { .. } | CliError::Parse { .. } => 4,
            CliError::Core(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<imager_core::Error> for CliError {
    fn from(e: imager_core::Error) -> Self {
        match e {
            imager_core::Error::BrokenPhaseChain { .. }
            | imager_core::Error::EmptySignalSpace
            | imager_core::Error::NonFiniteMatrix => CliError::Conditioning(e),
            imager_core::Error::ProtocolPrecondition(_) => CliError::Config(e.to_string()),
            other => CliError::Core(other),
        }
    }
}
