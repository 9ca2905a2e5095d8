use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dataset contains no observed events")]
    NoEvents,

    #[error("non-finite feature value in column `{column}` row {row}")]
    NonFinite { column: String, row: usize },

    #[error("column mismatch: model expects {expected:?}, got {found:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("failed to converge after {iterations} iterations (last relative objective change {delta:e})")]
    NotConverged { iterations: usize, delta: f64 },

    #[error("degenerate metric: {0}")]
    Degenerate(String),

    #[error("row `{id}` rejected: {reason}")]
    RowRejected { id: String, reason: String },

    #[error("{context}: {source}")]
    Cell {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures map to a distinct process exit code in strict runs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotConverged { .. } | Error::Degenerate(_) | Error::NoEvents => true,
            Error::Cell { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn at(self, context: impl Into<String>) -> Error {
        Error::Cell {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
