use thiserror::Error;

/// Errors produced by grid construction, operator evaluation and scans.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("invalid rectangle: {0}")]
    InvalidRect(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate fit: {0}")]
    Fit(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
