use thiserror::Error;

/// Errors raised by the tensor attention library.
#[derive(Debug, Error)]
pub enum TatError {
    /// Bad shapes, caps exceeded, malformed input files.
    #[error("validation error: {0}")]
    Validation(String),
    /// Overflow, non-positive normalizers, tolerance violations.
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TatError>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(TatError::Validation(msg.into()))
}

pub(crate) fn numerical<T>(msg: impl Into<String>) -> Result<T> {
    Err(TatError::Numerical(msg.into()))
}
