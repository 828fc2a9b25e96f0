use thiserror::Error;

/// Errors raised by the solver core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tau = {tau} must exceed rho * ||A^T A||_2 = {threshold}")]
    BelowSpectralThreshold { tau: f64, threshold: f64 },

    #[error("oracle for block {block} failed: {message}")]
    Oracle { block: usize, message: String },

    #[error("iteration {iteration} produced a non-finite value in {component}")]
    Divergence { iteration: usize, component: String },

    #[error("configuration violates a convergence requirement: {0}")]
    TheoryViolation(String),

    #[error("dense realization of dimension {dim} exceeds the cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("singular linear system")]
    Singular,

    #[error("trajectory is missing or too short: {0}")]
    MissingTrajectory(String),

    #[error("probe lies outside the feasible set (distance {distance:e})")]
    InfeasibleProbe { distance: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: impl Into<String>, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        })
    }
}
