use std::path::PathBuf;

use thiserror::Error;
use triage_core::TriageError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] TriageError),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn missing(path: impl Into<PathBuf>, hint: impl Into<String>) -> Self {
        CliError::Core(TriageError::MissingInput {
            path: path.into(),
            hint: hint.into(),
        })
    }

    /// 1 usage, 2 data error, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_data_error() => 2,
            CliError::Core(_) | CliError::Internal(_) => 3,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(TriageError::Json(e))
    }
}
