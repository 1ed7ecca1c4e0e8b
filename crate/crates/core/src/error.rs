use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("position out of bounds: {0}")]
    OutOfBounds(String),

    #[error("position too close to boundary: {0}")]
    Boundary(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("bad trajectory file format: {0}")]
    Format(String),

    #[error("truncated trajectory file: expected {expected} bytes, found {actual}")]
    Truncation { expected: u64, actual: u64 },

    #[error("trajectory failed validation ({} violations, first: {})", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Validation(Vec<Violation>),

    #[error("run {index} failed: {source}")]
    Run {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed or invalid input data (as opposed
    /// to bad arguments).
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Argument(_) | Error::Index(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
