use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },

    #[error("payload size mismatch: expected {expected} bytes, found {found}")]
    PayloadSize { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("non-finite value in vector for id `{0}`")]
    NonFinite(String),

    #[error("attribute `{0}` not found")]
    MissingAttribute(String),

    #[error("insufficient items for `{what}`: need {needed}, have {available}")]
    Insufficient {
        what: String,
        needed: usize,
        available: usize,
    },

    #[error("empty class: {0}")]
    EmptyClass(&'static str),

    #[error("duplicate concept name `{0}`")]
    DuplicateConcept(String),

    #[error("concept direction `{0}` has zero norm")]
    ZeroDirection(String),

    #[error("concept names do not match model: expected {expected:?}, found {found:?}")]
    ConceptMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing scores for {0} item(s)")]
    MissingScores(usize),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
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
