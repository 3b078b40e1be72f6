use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = TriageError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("failed to converge after {iterations} iterations: {diagnostics}")]
    Convergence {
        iterations: usize,
        diagnostics: String,
    },

    #[error("unsupported artifact version {found} (this build reads version {expected})")]
    Version { found: String, expected: u32 },

    #[error("missing upstream file {}: {hint}", path.display())]
    MissingInput { path: PathBuf, hint: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl TriageError {
    pub fn domain(msg: impl Into<String>) -> Self {
        TriageError::Domain(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        TriageError::Schema(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TriageError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by a bug or the environment.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            TriageError::Schema(_)
                | TriageError::Parse { .. }
                | TriageError::Domain(_)
                | TriageError::Degenerate(_)
                | TriageError::Version { .. }
                | TriageError::MissingInput { .. }
                | TriageError::Json(_)
                | TriageError::Csv(_)
        )
    }
}
