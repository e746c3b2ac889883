use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by omrkit operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed label {label:?}: {reason}")]
    MalformedLabel { label: String, reason: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("invalid image data: {0}")]
    Format(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("class statistics are empty (no annotations)")]
    EmptyStats,
    #[error("page {0:?} has no loadable image")]
    MissingImage(String),
    #[error("crop bank is empty: no rare class has any instance")]
    EmptyBank,
    #[error("layout does not fit: {0}")]
    DoesNotFit(String),
    #[error("class {0:?} has no cached bounding box")]
    MissingCacheEntry(String),
    #[error("no detection matched any ground-truth box")]
    NoMatches,
    #[error("degenerate image: {0}")]
    DegenerateImage(String),
    #[error("no candidate transform overlaps the scanned image")]
    NoOverlap,
    #[error("class {0:?} is not in the registry")]
    UnknownClass(String),
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
