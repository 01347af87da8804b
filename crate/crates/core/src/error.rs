use std::fmt;

use thiserror::Error;

/// One problem found while validating an input file.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ValidationIssue {
    /// 1-based line number in the source file, when the issue is tied to a line.
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training skipped: {0}")]
    TrainingSkipped(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation failed with {} issue(s); first: {}", .0.len(), .0.first().map(|i| i.to_string()).unwrap_or_default())]
    Validation(Vec<ValidationIssue>),

    #[error("no matched question/answer pairs to report on")]
    EmptyReport,

    #[error("oracle refused: {0}")]
    OracleRefused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
