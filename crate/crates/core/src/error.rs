use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("malformed embedding file: {0}")]
    EmbeddingFormat(String),

    #[error("record `{0}` has no embedding row")]
    MissingEmbedding(String),

    #[error("embedding row {row} (`{id}`) has norm {norm:.6}; rows must be unit length within 1e-3")]
    NormViolation { row: usize, id: String, norm: f64 },

    #[error("record `{0}` has no resolved local time")]
    MissingLocalTime(String),

    #[error("unknown time zone `{0}`")]
    UnknownTimeZone(String),

    #[error("{what}: have {have} samples, need at least {need}")]
    InsufficientData {
        what: &'static str,
        have: usize,
        need: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
