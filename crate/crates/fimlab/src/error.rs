//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: matrix is not symmetric positive-definite ({detail})")]
    NotSpd { context: String, detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("non-finite score at draw index {index}")]
    NonFiniteScore { index: usize },

    #[error("degenerate sample batch: {0}")]
    DegenerateBatch(String),

    #[error("estimator failure: {0}")]
    Estimator(String),

    #[error("design candidate disqualified: {0}")]
    Disqualified(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
