//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by field, optics, sensor, sparse-coding and retrieval
/// operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("pixel {0} is covered by no patch")]
    UncoveredPixel(usize),

    #[error("SNR undefined: total intensity is zero")]
    UndefinedSnr,

    #[error("observation model mismatch: {0}")]
    ModelMismatch(String),

    #[error("bad raster file: {0}")]
    BadRaster(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
