use thiserror::Error;

/// Errors raised anywhere in the reduction pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("structure constants are not antisymmetric: c[{gamma}][{alpha}][{beta}] + c[{gamma}][{beta}][{alpha}] = {residual:e}")]
    NotAntisymmetric {
        gamma: usize,
        alpha: usize,
        beta: usize,
        residual: f64,
    },
    #[error("Jacobi identity violated, max residual {residual:e}")]
    JacobiViolation { residual: f64 },
    #[error("Cartan-Killing form is not negative definite (largest eigenvalue {largest_eigenvalue:e})")]
    IndefiniteKilling { largest_eigenvalue: f64 },
    #[error("Faddeev-Popov matrix is singular (condition number {condition:e})")]
    SingularFp { condition: f64 },
    #[error("point is not on the gauge surface, |chi| = {residual:e}")]
    NotOnSigma { residual: f64 },
    #[error("{what} is ill-conditioned (condition number {condition:e})")]
    IllConditioned { what: String, condition: f64 },
    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("group coordinates left the exponential chart (|theta| = {norm})")]
    ChartOutOfRange { norm: f64 },
    #[error("tracked eigenvector lost: overlap {overlap} < 0.5")]
    EigenCrossing { overlap: f64 },
    #[error("step failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },
    #[error("state blew up at t = {t} (norm {norm:e})")]
    BlowUp { t: f64, norm: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
