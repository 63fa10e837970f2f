use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of bounds: {0}")]
    Bounds(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("jet anchor mismatch: outer anchored at {outer}, inner value {inner}, tolerance {tol}")]
    AnchorMismatch {
        outer: String,
        inner: String,
        tol: String,
    },

    #[error("map not invertible: {0}")]
    NonInvertible(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("precision failure: {0}")]
    Precision(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("target not verifiably Liouville at this order: {0}")]
    NotVerifiablyLiouville(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
