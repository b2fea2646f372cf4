//! Realized (co-)volatility estimators for a pair of diffusions with
//! deterministic coefficients, and the large and moderate deviation rate
//! functions that govern their tails.
//!
//! ```
//! use covol_core::{ldp_rate, CoefficientSpec};
//!
//! let spec = CoefficientSpec::constant(1.0, 1.0, 0.0).unwrap();
//! let r = ldp_rate([1.5, 1.0, 0.0], &spec).unwrap();
//! assert!((r.value - 0.5 * (0.5 - 1.5f64.ln())).abs() < 1e-9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod error;
pub mod estimators;
pub mod montecarlo;
pub mod quadrature;
pub mod ratefn;
pub mod simulate;
pub mod verify;

pub use coefficients::{CoefFn, CoefficientSpec, Drift, IncrementMoments, Integrand, DEFAULT_RHO_MARGIN};
pub use error::{CovolError, Result};
pub use estimators::{
    drift_corrected_vector, integrated_truth, realized_beta, realized_correlation, realized_trajectory,
    realized_vector, tilde_vector, Asset, RealizedTrajectory, RealizedVector,
};
pub use montecarlo::{
    chi_square_oracle, covariance_check, empirical_rate_curve, estimate_tail_naive, estimate_tail_tilted,
    CovarianceCheck, Direction, Event, Scale, Statistic, TailEstimate, TailQuery,
};
pub use ratefn::*;
pub use simulate::{
    derive_seed, simulate_path, simulate_tilted, PathSampler, SamplePath, TiltedSample, TiltedSampler,
};

/// Version string embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
