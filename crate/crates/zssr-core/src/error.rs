use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by every module in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unreadable file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unreadable image {path}: {reason}")]
    ImageDecode { path: PathBuf, reason: String },

    #[error("unsupported image {path}: {reason}")]
    UnsupportedImage { path: PathBuf, reason: String },

    #[error("cannot encode image {path}: {reason}")]
    ImageEncode { path: PathBuf, reason: String },

    #[error("kernel file {path}, line {line}: {reason}")]
    KernelFormat {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("training diverged: {0}")]
    NonFinite(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("JPEG codec unavailable: {0}")]
    CodecUnavailable(String),

    #[error("manifest {path}, record {record}: {reason}")]
    Manifest {
        path: PathBuf,
        record: usize,
        reason: String,
    },
}

impl Error {
    /// Wrap an I/O error with the path it happened on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
