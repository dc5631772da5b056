use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("object id {0} is out of range")]
    ObjectOutOfRange(u32),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("relation `{relation}` has arity {expected}, got {found} arguments")]
    ArityMismatch {
        relation: String,
        expected: usize,
        found: usize,
    },

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid formula: {0}")]
    InvalidFormula(String),

    #[error("query is outside the range-restricted conjunctive fragment: {0}")]
    UnsupportedQuery(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot corrupt tuples over a domain of {0} object(s)")]
    DomainTooSmall(usize),

    #[error("no positive examples for the target query")]
    NoPositiveExamples,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("training diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },

    #[error("content hash mismatch: artifact has {found}, expected {expected}")]
    HashMismatch { expected: String, found: String },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
