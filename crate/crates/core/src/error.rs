use thiserror::Error;

#[derive(Debug, Error)]
pub enum HdgError {
    #[error("invalid mesh parameters: {0}")]
    InvalidMesh(String),

    #[error("polynomial degree {0} is not supported (need k >= 1)")]
    InvalidDegree(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("local velocity block of cell {cell} is not positive definite (alpha = {alpha})")]
    LocalFactorization { cell: usize, alpha: f64 },

    #[error("sparse factorization failed: {0}")]
    SparseFactorization(String),

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("problem too large for dense verification ({size} > {limit})")]
    TooLarge { size: usize, limit: usize },

    #[error("spectral defect: {0}")]
    SpectralDefect(String),

    #[error("Krylov breakdown at iteration {iteration}: {reason}")]
    Breakdown { iteration: usize, reason: String },

    #[error("invalid solver option: {0}")]
    InvalidOption(String),

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HdgError>;
