use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("schema error in {context}: {message}")]
    Schema { context: String, message: String },

    #[error("{kind} {id} referenced by {referrer} does not exist")]
    DanglingReference {
        kind: &'static str,
        id: u64,
        referrer: String,
    },

    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u64 },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("detections span several images ({first} and {other}); group them per image first")]
    MixedImages { first: u64, other: u64 },

    #[error("image {0} has no tile plan")]
    MissingPlan(u64),

    #[error("unknown tile image id {0}")]
    UnknownTile(u64),

    #[error("failed to decode image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem or image codecs rather than of
    /// the data itself.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Image { .. })
    }
}
