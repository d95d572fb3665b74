use thiserror::Error;

/// Errors surfaced by tensor construction, layer ops and the tape.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Errors for the binary tensor-bundle format.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic, not a tensor bundle")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated or corrupt bundle")]
    Truncated,
    #[error("invalid tensor record: {0}")]
    BadRecord(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
