use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),

    /// A serialized instance failed validation. `field` names the offending field.
    #[error("invalid instance field `{field}`: {reason}")]
    Instance { field: String, reason: String },

    #[error("trace line {line}: {reason}")]
    TraceRecord { line: usize, reason: String },

    #[error("trace has {available} records but {required} users were requested")]
    TraceTooShort { available: usize, required: usize },

    #[error("invalid token distribution: {0}")]
    Distribution(String),

    #[error("exhaustive search over {states} states exceeds budget {budget}")]
    BudgetExceeded { states: f64, budget: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn instance(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Instance {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
