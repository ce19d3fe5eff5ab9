use thiserror::Error;

/// Errors surfaced by the training, preprocessing and audit pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("example norm {norm} exceeds the unit ball (limit 1 + 1e-12)")]
    NormBound { norm: f64 },

    #[error("label {0} is not in {{-1, +1}}")]
    BadLabel(f64),

    #[error("solver did not converge within {max_iters} iterations (final gradient norm {grad_norm:e}, tolerance {grad_tol:e})")]
    NoConvergence {
        max_iters: usize,
        grad_norm: f64,
        grad_tol: f64,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("insufficient data: need at least {needed} examples, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown category {value:?} for column {column:?} at line {line}")]
    UnknownCategory {
        column: String,
        value: String,
        line: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
