use std::io;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad magic at offset {offset}: expected {expected:?}, found {found:?}")]
    BadMagic {
        offset: u64,
        expected: String,
        found: String,
    },

    #[error("unsupported version {found} at offset {offset} (expected {expected})")]
    VersionMismatch { offset: u64, expected: u32, found: u32 },

    #[error("truncated file: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: u64,
        needed: u64,
        available: u64,
    },

    #[error("malformed file at offset {offset}: {reason}")]
    Malformed { offset: u64, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("autodiff: {0}")]
    Graph(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for every error that describes a malformed on-disk file.
    pub fn is_format(&self) -> bool {
        matches!(
            self,
            Error::BadMagic { .. }
                | Error::VersionMismatch { .. }
                | Error::Truncated { .. }
                | Error::Malformed { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
