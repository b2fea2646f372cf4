//! Rate functions for the realized (co-)volatility vector.

pub mod conjugate;
pub mod derived;
pub mod integrated;
pub mod mdp;
pub mod pathwise;
pub mod pointwise;

pub use conjugate::{conjugate, ldp_rate, ldp_rate_constant, pointwise_conjugate, ConjugateResult};
pub use derived::{
    affine_constrained_quadratic_min, beta_ldp_rate, beta_mdp_rate, correlation_ldp_rate,
    correlation_mdp_rate,
};
pub use integrated::{finite_n_cgf, integrated_cgf, ConvexCgf, FiniteNCgf, IntegratedCgf};
pub use mdp::{mdp_argmax, mdp_rate, mdp_sigma1, MdpCovariance, MdpScale};
pub use pathwise::{pathwise_ldp_rate, pathwise_mdp_rate, PiecewiseLinearPath};
pub use pointwise::{
    cgf_gradient, cgf_hessian, cgf_hessian_at_zero, cgf_pointwise, in_domain, legendre_argmax,
    legendre_pointwise, recession, TiltPoint,
};
