use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no samples")]
    NoSamples,

    #[error("line {line}: non-finite feature value")]
    NonFinite { line: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Cholesky breakdown; `pivot` is the offending diagonal value.
    #[error("matrix is not positive definite: pivot {index} = {pivot:e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("singular system: smallest pivot {pivot:e} below guard")]
    Singular { pivot: f64 },

    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("dense path refused: n = {n} exceeds cap {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("vertex {0} has zero degree")]
    IsolatedVertex(usize),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
