use std::path::PathBuf;

use stripepaint_tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error at {path}: {msg}")]
    Image { path: PathBuf, msg: String },

    #[error("unsupported format at {path}: {msg}")]
    UnsupportedFormat { path: PathBuf, msg: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("size mismatch: {0}")]
    Size(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("mask generation failed: {0}")]
    Generation(String),

    #[error("non-finite loss term `{term}`")]
    NonFinite { term: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
}

impl Error {
    /// An I/O failure on `path`.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used on the command line's error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Tensor(_) => "tensor",
            Error::Io { .. } => "io",
            Error::Image { .. } => "image",
            Error::UnsupportedFormat { .. } => "unsupported-format",
            Error::Param(_) => "param",
            Error::Size(_) => "size",
            Error::Config(_) => "config",
            Error::Generation(_) => "generation",
            Error::NonFinite { .. } => "non-finite",
            Error::Checkpoint(_) => "checkpoint",
            Error::EmptyCorpus(_) => "empty-corpus",
        }
    }
}

/// Lets crate operations run inside tensor-level closures such as gradient
/// checks.
impl From<Error> for TensorError {
    fn from(e: Error) -> Self {
        match e {
            Error::Tensor(t) => t,
            other => TensorError::Contract(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
