//! Time-integrated CGFs: the limit Λ(λ) = ∫₀¹ P_{ρ_t}(λ₁σ₁², λ₂σ₂², λ₃σ₁σ₂) dt
//! and the finite-n Λ_n(λ) = (1/n) log E exp(n⟨λ, V₁ⁿ(X−Y)⟩).

use nalgebra::Matrix3;

use super::pointwise::{GaussianQuadCgf, TiltPoint};
use crate::coefficients::CoefficientSpec;
use crate::error::Result;
use crate::quadrature;

/// A smooth convex function of λ ∈ ℝ³ with an open effective domain.
pub trait ConvexCgf {
    /// Value, `f64::INFINITY` outside the domain.
    fn value(&self, lambda: &[f64; 3]) -> f64;

    /// Gradient and Hessian at an interior point.
    fn derivatives(&self, lambda: &[f64; 3]) -> Option<([f64; 3], Matrix3<f64>)>;

    /// Distance-like margin to the domain boundary (0 on the boundary).
    fn boundary_margin(&self, lambda: &[f64; 3]) -> f64;
}

impl ConvexCgf for GaussianQuadCgf {
    fn value(&self, lambda: &[f64; 3]) -> f64 {
        GaussianQuadCgf::value(self, lambda)
    }

    fn derivatives(&self, lambda: &[f64; 3]) -> Option<([f64; 3], Matrix3<f64>)> {
        self.tilted_covariance(lambda)
            .map(|s| (s, GaussianQuadCgf::hessian_from_cov(s)))
    }

    fn boundary_margin(&self, lambda: &[f64; 3]) -> f64 {
        GaussianQuadCgf::boundary_margin(self, lambda)
    }
}

/// One weighted term w · P_c(d ⊙ λ) of a CGF that is a sum of Gaussian
/// quadratic-form CGFs with diagonal scalings.
#[derive(Debug, Clone, Copy)]
struct ScaledTerm {
    weight: f64,
    scale: [f64; 3],
    cgf: GaussianQuadCgf,
}

impl ScaledTerm {
    fn scaled(&self, l: &[f64; 3]) -> [f64; 3] {
        [l[0] * self.scale[0], l[1] * self.scale[1], l[2] * self.scale[2]]
    }
}

fn sum_value(terms: &[ScaledTerm], l: &[f64; 3]) -> f64 {
    let mut total = 0.0;
    for term in terms {
        let v = term.cgf.value(&term.scaled(l));
        if v == f64::INFINITY {
            return f64::INFINITY;
        }
        total += term.weight * v;
    }
    total
}

fn sum_derivatives(terms: &[ScaledTerm], l: &[f64; 3]) -> Option<([f64; 3], Matrix3<f64>)> {
    let mut grad = [0.0; 3];
    let mut hess = Matrix3::zeros();
    for term in terms {
        let s = term.cgf.tilted_covariance(&term.scaled(l))?;
        let h = GaussianQuadCgf::hessian_from_cov(s);
        let d = term.scale;
        for i in 0..3 {
            grad[i] += term.weight * d[i] * s[i];
            for j in 0..3 {
                hess[(i, j)] += term.weight * d[i] * d[j] * h[(i, j)];
            }
        }
    }
    Some((grad, hess))
}

fn min_margin(terms: &[ScaledTerm], l: &[f64; 3]) -> f64 {
    terms
        .iter()
        .map(|t| t.cgf.boundary_margin(&t.scaled(l)))
        .fold(f64::INFINITY, f64::min)
}

/// Λ discretized on the Gauss–Legendre nodes of the coefficient cells.
///
/// A tilt counts as inside the domain only if it is inside D_{ρ_t} at every
/// node.
#[derive(Debug, Clone)]
pub struct IntegratedCgf {
    terms: Vec<ScaledTerm>,
}

impl IntegratedCgf {
    pub fn new(spec: &CoefficientSpec) -> Self {
        let terms = quadrature::nodes_on_knots(spec.knots())
            .into_iter()
            .map(|(t, w)| {
                let (s1, s2, rho) = spec.eval_unchecked(t);
                ScaledTerm {
                    weight: w,
                    scale: [s1 * s1, s2 * s2, s1 * s2],
                    cgf: GaussianQuadCgf::new(rho),
                }
            })
            .collect();
        IntegratedCgf { terms }
    }

    pub fn contains(&self, lambda: &[f64; 3]) -> bool {
        self.terms.iter().all(|t| t.cgf.contains(&t.scaled(lambda)))
    }
}

impl ConvexCgf for IntegratedCgf {
    fn value(&self, lambda: &[f64; 3]) -> f64 {
        sum_value(&self.terms, lambda)
    }

    fn derivatives(&self, lambda: &[f64; 3]) -> Option<([f64; 3], Matrix3<f64>)> {
        sum_derivatives(&self.terms, lambda)
    }

    fn boundary_margin(&self, lambda: &[f64; 3]) -> f64 {
        min_margin(&self.terms, lambda)
    }
}

/// Λ_n as the average of the per-interval CGFs with tilts (nλ₁a₁ₖ, nλ₂a₂ₖ, nλ₃√(a₁ₖa₂ₖ)).
#[derive(Debug, Clone)]
pub struct FiniteNCgf {
    terms: Vec<ScaledTerm>,
}

impl FiniteNCgf {
    pub fn new(spec: &CoefficientSpec, n: usize) -> Result<Self> {
        let m = spec.interval_moments(n)?;
        let nf = n as f64;
        let terms = (0..n)
            .map(|k| ScaledTerm {
                weight: 1.0 / nf,
                scale: [nf * m.a1[k], nf * m.a2[k], nf * (m.a1[k] * m.a2[k]).sqrt()],
                cgf: GaussianQuadCgf::new(m.c[k]),
            })
            .collect();
        Ok(FiniteNCgf { terms })
    }

    /// Index (0-based) of the first interval whose scaled tilt leaves its domain.
    pub fn first_violation(&self, lambda: &[f64; 3]) -> Option<usize> {
        self.terms.iter().position(|t| !t.cgf.contains(&t.scaled(lambda)))
    }
}

impl ConvexCgf for FiniteNCgf {
    fn value(&self, lambda: &[f64; 3]) -> f64 {
        sum_value(&self.terms, lambda)
    }

    fn derivatives(&self, lambda: &[f64; 3]) -> Option<([f64; 3], Matrix3<f64>)> {
        sum_derivatives(&self.terms, lambda)
    }

    fn boundary_margin(&self, lambda: &[f64; 3]) -> f64 {
        min_margin(&self.terms, lambda)
    }
}

/// Λ(λ); `f64::INFINITY` if the scaled tilt leaves D_{ρ_t} at any node.
pub fn integrated_cgf(lambda: TiltPoint, spec: &CoefficientSpec) -> f64 {
    IntegratedCgf::new(spec).value(&lambda.0)
}

/// Λ_n(λ); `f64::INFINITY` if any interval tilt leaves its domain.
pub fn finite_n_cgf(lambda: TiltPoint, spec: &CoefficientSpec, n: usize) -> Result<f64> {
    Ok(FiniteNCgf::new(spec, n)?.value(&lambda.0))
}
