use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("duplicate {kind} `{id}`")]
    Duplicate { kind: &'static str, id: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate bias direction: group means differ by {norm:e}")]
    DegenerateDirection { norm: f64 },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("column `{column}` is collinear with {others:?}")]
    RankDeficient { column: String, others: Vec<String> },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("artifact: {0}")]
    Artifact(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
