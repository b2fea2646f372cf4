use thiserror::Error;

pub type Result<T> = std::result::Result<T, CovolError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovolError {
    #[error("{what} = {value} is outside its domain ({reason})")]
    Domain {
        what: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid coefficient specification: {0}")]
    InvalidSpec(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("tilt leaves the CGF domain on interval {interval}")]
    TiltOutOfDomain { interval: usize },

    #[error("degenerate path: {0}")]
    DegeneratePath(&'static str),

    #[error("unsupported hypothesis: {0}")]
    Unsupported(String),

    #[error("matrix is numerically singular (condition number {condition:e})")]
    Singular { condition: f64 },

    #[error(
        "optimizer did not converge after {iterations} iterations \
         (gradient norm {grad_norm:e}, last step {last_step:e})"
    )]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        last_step: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl CovolError {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CovolError::Singular { .. }
                | CovolError::NonConvergence { .. }
                | CovolError::Numerical(_)
                | CovolError::Internal(_)
        )
    }

    pub(crate) fn domain(what: &'static str, value: f64, reason: &'static str) -> Self {
        CovolError::Domain {
            what,
            value,
            reason,
        }
    }
}
