use std::path::PathBuf;

use classweight_core::Error as CoreError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_INVALID: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("{0}")]
    Core(#[from] CoreError),

    #[error("weights violate constraints: {0}")]
    Invalid(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self::Config(message.into())
    }

    pub fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Self::Parse { path: path.into(), line, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io { .. } | Self::Parse { .. } => EXIT_CONFIG,
            Self::Invalid(_) => EXIT_INVALID,
            Self::Core(e) => match e {
                CoreError::AllSubsetsInfeasible { .. } => EXIT_INFEASIBLE,
                CoreError::Solver(_) => EXIT_FAILURE,
                _ => EXIT_CONFIG,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
