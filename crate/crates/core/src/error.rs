//! Error type shared by all solver and model-construction paths.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (relative defect {defect:.3e}, tolerance {tol:.3e})")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e}, max {max_eig:.3e})")]
    NotPositiveSemidefinite { min_eig: f64, max_eig: f64 },

    #[error("matrix conditioning estimate {estimate:.3e} exceeds limit {limit:.3e}")]
    IllConditioned { estimate: f64, limit: f64 },

    #[error("fixed-point iteration hit the cap of {max_iter} iterations (last residual {residual:.3e})")]
    MaxIterationsExceeded { max_iter: usize, residual: f64 },

    #[error("fixed-point iterates became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("solution rejected: canonical defect {defect:.3e} exceeds {limit:.3e}")]
    NotConverged { defect: f64, limit: f64 },

    #[error("canonical solve failed at optimizer iteration {iteration}: {source}")]
    OptimizerInnerSolve {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}
