use thiserror::Error;

/// Errors raised by the solvers and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{param}`: {reason}")]
    Domain { param: &'static str, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("field does not match any solution class: {0}")]
    Classification(String),

    #[error("Airy boundary system is singular (scaled denominator {0:e})")]
    Singularity(f64),

    #[error("cumulative quadrature produced a non-finite value at node {0}")]
    Quadrature(usize),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("series order {0} is not available")]
    Index(usize),

    #[error(
        "Newton iteration did not converge (best residual {best_residual:e}, \
         reached delta_j = {reached_delta_j} of target {target_delta_j})"
    )]
    NonConvergence {
        best_residual: f64,
        reached_delta_j: f64,
        target_delta_j: f64,
    },

    #[error("grid mismatch: {0} vs {1} intervals")]
    GridMismatch(usize, usize),

    #[error("config: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(param: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            param,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
