use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("category cardinality mismatch: {left} vs {right}")]
    CardinalityMismatch { left: u32, right: u32 },

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("sample does not conform to the dataset schema: {0}")]
    SchemaMismatch(String),

    #[error("operation requires {expected} responses")]
    WrongResponseKind { expected: &'static str },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid mode: {0}")]
    InvalidMode(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for failures caused by the filesystem rather than by the input values.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
