use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the fusion library.
#[derive(Debug, Error)]
pub enum FusionError {
    /// An argument violated an operation's precondition (dimensions, ranges, thresholds).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Internal algorithm state violated an invariant (e.g. non-positive scale parameters).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A numerical self-check failed; indicates a bug, not bad user input.
    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    /// Filesystem access failed.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An image file could not be decoded or encoded.
    #[error("image format error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// An image uses a sample format the loader does not support.
    #[error("unsupported image format on {path}: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },

    /// Dataset discovery produced zero usable pairs.
    #[error("no pairs found under {root}: {expectation}")]
    NoPairsFound { root: PathBuf, expectation: String },
}

pub type Result<T> = std::result::Result<T, FusionError>;
