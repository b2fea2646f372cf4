//! Numerical Legendre–Fenchel transform sup_λ (⟨λ,x⟩ − Λ(λ)) by damped
//! Newton ascent from λ = 0 with a domain-respecting backtracking line search.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use super::integrated::{ConvexCgf, IntegratedCgf};
use super::pointwise::{check_correlation, GaussianQuadCgf};
use crate::coefficients::CoefficientSpec;
use crate::error::{CovolError, Result};

pub const GRADIENT_TOLERANCE: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 200;
/// Iterates closer than this to ∂D with a non-vanishing gradient are flagged.
pub const BOUNDARY_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugateResult {
    /// Supremum estimate; `f64::INFINITY` when x is outside the effective domain.
    pub value: f64,
    /// False when the iterates ran into the domain boundary before the
    /// gradient vanished (supremum possibly not attained).
    pub attained: bool,
    pub argmax: Option<[f64; 3]>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl ConjugateResult {
    fn infinite() -> Self {
        ConjugateResult {
            value: f64::INFINITY,
            attained: false,
            argmax: None,
            iterations: 0,
            gradient_norm: f64::NAN,
        }
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// sup_λ (⟨λ,x⟩ − f(λ)) for a smooth convex `f` with 0 in the interior of its domain.
pub fn conjugate<C: ConvexCgf>(cgf: &C, x: [f64; 3]) -> Result<ConjugateResult> {
    let objective = |l: &[f64; 3]| dot(l, &x) - cgf.value(l);
    let mut lambda = [0.0; 3];
    let mut current = objective(&lambda);
    if !current.is_finite() {
        return Err(CovolError::Numerical("CGF is not finite at the origin".into()));
    }
    let tol = GRADIENT_TOLERANCE * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
    let mut last_step = f64::NAN;
    let mut noise_steps = 0;
    for iteration in 0..MAX_ITERATIONS {
        let (grad, hess) = cgf
            .derivatives(&lambda)
            .ok_or_else(|| CovolError::Internal("iterate left the CGF domain".into()))?;
        let residual = [x[0] - grad[0], x[1] - grad[1], x[2] - grad[2]];
        let grad_norm = dot(&residual, &residual).sqrt();
        let done = |attained| ConjugateResult {
            value: current,
            attained,
            argmax: Some(lambda),
            iterations: iteration,
            gradient_norm: grad_norm,
        };
        if grad_norm <= tol {
            return Ok(done(true));
        }
        let step = newton_direction(&hess, &residual)?;
        let decrement = dot(&residual, &step);
        if decrement < 1e-24 {
            return Ok(done(true));
        }

        // Once the predicted gain is below the rounding level of the objective,
        // Armijo comparisons are noise; full Newton steps are taken instead.
        let scale = 1.0 + current.abs() + dot(&lambda, &x).abs();
        let in_noise = decrement < 1e-10 * scale;
        if in_noise {
            noise_steps += 1;
            if noise_steps > 3 {
                // Gradient is at its rounding floor.
                return Ok(done(true));
            }
        }
        let mut t = 1.0;
        let accepted = loop {
            let candidate = [0, 1, 2].map(|i| lambda[i] + t * step[i]);
            let value = objective(&candidate);
            if value.is_finite() && (in_noise || value >= current + 1e-4 * t * decrement) {
                break Some((candidate, value));
            }
            t *= 0.5;
            if t < 1e-18 {
                break None;
            }
        };
        match accepted {
            Some((candidate, value)) => {
                lambda = candidate;
                current = value;
                last_step = t;
            }
            None => {
                // No ascent possible along the Newton direction: either the
                // sup sits on the domain boundary or rounding has taken over.
                if cgf.boundary_margin(&lambda) < BOUNDARY_MARGIN {
                    return Ok(done(false));
                }
                if in_noise {
                    return Ok(done(true));
                }
                return Err(CovolError::NonConvergence {
                    iterations: iteration,
                    grad_norm,
                    last_step: t,
                });
            }
        }
    }
    let grad_norm = cgf
        .derivatives(&lambda)
        .map(|(g, _)| {
            let r = [x[0] - g[0], x[1] - g[1], x[2] - g[2]];
            dot(&r, &r).sqrt()
        })
        .unwrap_or(f64::NAN);
    if cgf.boundary_margin(&lambda) < BOUNDARY_MARGIN {
        return Ok(ConjugateResult {
            value: current,
            attained: false,
            argmax: Some(lambda),
            iterations: MAX_ITERATIONS,
            gradient_norm: grad_norm,
        });
    }
    Err(CovolError::NonConvergence {
        iterations: MAX_ITERATIONS,
        grad_norm,
        last_step,
    })
}

fn newton_direction(hess: &Matrix3<f64>, residual: &[f64; 3]) -> Result<[f64; 3]> {
    let rhs = Vector3::from(*residual);
    let d = hess
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| CovolError::Numerical("CGF Hessian is not positive definite".into()))?;
    Ok([d[0], d[1], d[2]])
}

fn in_effective_domain(x: &[f64; 3]) -> bool {
    x[0] > 0.0 && x[1] > 0.0 && x[0] * x[1] > x[2] * x[2]
}

/// I_ldp(x) = sup_λ (⟨λ,x⟩ − Λ(λ)) for the fixed-time realized vector.
pub fn ldp_rate(x: [f64; 3], spec: &CoefficientSpec) -> Result<ConjugateResult> {
    if !in_effective_domain(&x) {
        return Ok(ConjugateResult::infinite());
    }
    conjugate(&IntegratedCgf::new(spec), x)
}

/// Numerical conjugate of a single P_c (used to cross-check the closed form).
pub fn pointwise_conjugate(x: [f64; 3], c: f64) -> Result<ConjugateResult> {
    check_correlation(c)?;
    if !in_effective_domain(&x) {
        return Ok(ConjugateResult::infinite());
    }
    conjugate(&GaussianQuadCgf::new(c), x)
}

/// Closed-form rate for constant coefficients: P*_ρ(x₁/σ₁², x₂/σ₂², x₃/(σ₁σ₂)).
pub fn ldp_rate_constant(x: [f64; 3], sigma1: f64, sigma2: f64, rho: f64) -> Result<f64> {
    check_volatilities(sigma1, sigma2)?;
    check_correlation(rho)?;
    let scaled = [
        x[0] / (sigma1 * sigma1),
        x[1] / (sigma2 * sigma2),
        x[2] / (sigma1 * sigma2),
    ];
    Ok(GaussianQuadCgf::new(rho).legendre(&scaled))
}

pub(crate) fn check_volatilities(sigma1: f64, sigma2: f64) -> Result<()> {
    if !(sigma1 > 0.0 && sigma1.is_finite()) {
        return Err(CovolError::domain("sigma1", sigma1, "must be positive"));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(CovolError::domain("sigma2", sigma2, "must be positive"));
    }
    Ok(())
}
