use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image dimensions {height}x{width} are not multiples of patch side {side}")]
    Dimension {
        height: usize,
        width: usize,
        side: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("covariance matrix is singular after regularization (det = {det:e})")]
    SingularCovariance { det: f64 },

    #[error("vertex {vertex} has zero degree")]
    ZeroDegree { vertex: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("expected {expected} patches, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("problem of size {n} exceeds the brute-force limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("mismatched inputs: {0}")]
    MismatchedInputs(String),

    #[error("malformed table file: {0}")]
    TableFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
