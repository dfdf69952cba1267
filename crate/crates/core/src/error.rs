use thiserror::Error;

/// Errors reported by tensor construction, file I/O, and the completion
/// solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch ({details})")]
    DimMismatch { op: &'static str, details: String },

    #[error("{op}: invalid argument ({details})")]
    InvalidArgument { op: &'static str, details: String },

    #[error("transform matrix is not unitary up to scale (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("sampling pattern does not cover whole mode-3 tubes")]
    NotTubeComplete,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid tensor file: {0}")]
    BadFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(op: &'static str, details: impl Into<String>) -> Self {
        Error::DimMismatch { op, details: details.into() }
    }

    pub(crate) fn arg(op: &'static str, details: impl Into<String>) -> Self {
        Error::InvalidArgument { op, details: details.into() }
    }
}
