use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("unsupported format version `{found}` (expected `{expected}`)")]
    Version { expected: &'static str, found: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: expected {expected} bytes of payload, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("missing weights for method {0}")]
    MissingModel(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
