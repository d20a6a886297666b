use thiserror::Error;

/// Failures raised by the numerical kernel and the model layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is singular")]
    Singular,
    #[error("eigenvalue iteration did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("negative rate {rate} for jump {index}")]
    NegativeRate { index: usize, rate: f64 },
    #[error("analytic derivative requested but the model does not provide one")]
    MissingDerivative,
    #[error("ill-conditioned spectrum: {0}")]
    IllConditioned(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("state check failed: {0}")]
    BadState(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;
