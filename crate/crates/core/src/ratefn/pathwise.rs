//! Rate functionals on absolutely continuous trajectories.
//!
//! Inputs are piecewise linear, so the singular part of the pathwise LDP rate
//! is identically zero and only the density term is evaluated.

use serde::{Deserialize, Serialize};

use super::mdp::kernel_inverse;
use super::pointwise::GaussianQuadCgf;
use crate::coefficients::CoefficientSpec;
use crate::error::{CovolError, Result};
use crate::quadrature;

/// A continuous piecewise-linear map [0,1] → ℝ³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathDoc", into = "PathDoc")]
pub struct PiecewiseLinearPath {
    breakpoints: Vec<f64>,
    values: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathDoc {
    breakpoints: Vec<f64>,
    values: Vec<[f64; 3]>,
}

impl PiecewiseLinearPath {
    /// Breakpoints must run strictly increasing from 0 to 1 and the path must start at 0.
    pub fn new(breakpoints: Vec<f64>, values: Vec<[f64; 3]>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(CovolError::Contract(format!(
                "need at least two breakpoints with one value each (got {} breakpoints, {} values)",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(CovolError::Contract("breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CovolError::Contract("breakpoints must be strictly increasing".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CovolError::Contract("path values must be finite".into()));
        }
        if values[0] != [0.0; 3] {
            return Err(CovolError::Contract(format!("path must start at 0, got {:?}", values[0])));
        }
        Ok(PiecewiseLinearPath { breakpoints, values })
    }

    /// f(t) = t·x.
    pub fn linear(x: [f64; 3]) -> Self {
        PiecewiseLinearPath {
            breakpoints: vec![0.0, 1.0],
            values: vec![[0.0; 3], x],
        }
    }

    /// Samples `g` at `cells + 1` equally spaced points.
    pub fn interpolate<G: FnMut(f64) -> [f64; 3]>(cells: usize, mut g: G) -> Result<Self> {
        let cells = cells.max(1);
        let breakpoints: Vec<f64> = (0..=cells).map(|k| k as f64 / cells as f64).collect();
        let values = breakpoints.iter().map(|&t| g(t)).collect();
        Self::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[[f64; 3]] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> [f64; 3] {
        let k = self.cell_of(t);
        let (t0, t1) = (self.breakpoints[k], self.breakpoints[k + 1]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (self.values[k], self.values[k + 1]);
        [0, 1, 2].map(|i| a[i] + w * (b[i] - a[i]))
    }

    fn cell_of(&self, t: f64) -> usize {
        let cells = self.breakpoints.len() - 1;
        self.breakpoints[1..cells]
            .iter()
            .position(|&b| t < b)
            .unwrap_or(cells - 1)
    }

    fn slope(&self, k: usize) -> [f64; 3] {
        let dt = self.breakpoints[k + 1] - self.breakpoints[k];
        let (a, b) = (self.values[k], self.values[k + 1]);
        [0, 1, 2].map(|i| (b[i] - a[i]) / dt)
    }

    /// Σ over linearity cells of ∫ g(t, f′) dt, with each cell further split
    /// at the coefficient knots.
    fn integrate_cells<G: FnMut(f64, &[f64; 3]) -> f64>(&self, spec: &CoefficientSpec, mut g: G) -> f64 {
        let mut total = 0.0;
        for k in 0..self.breakpoints.len() - 1 {
            let slope = self.slope(k);
            total += quadrature::integrate_piecewise(
                spec.knots(),
                self.breakpoints[k],
                self.breakpoints[k + 1],
                |t| g(t, &slope),
            );
        }
        total
    }

    fn slopes(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.breakpoints.len() - 1).map(|k| self.slope(k))
    }
}

impl TryFrom<PathDoc> for PiecewiseLinearPath {
    type Error = CovolError;

    fn try_from(doc: PathDoc) -> Result<Self> {
        PiecewiseLinearPath::new(doc.breakpoints, doc.values)
    }
}

impl From<PiecewiseLinearPath> for PathDoc {
    fn from(p: PiecewiseLinearPath) -> Self {
        PathDoc {
            breakpoints: p.breakpoints,
            values: p.values,
        }
    }
}

/// ∫₀¹ P*_{ρ_t}(f′₁/σ₁², f′₂/σ₂², f′₃/(σ₁σ₂)) dt.
///
/// +∞ as soon as one cell has a derivative outside {f′₁>0, f′₂>0, f′₃² < f′₁f′₂}.
pub fn pathwise_ldp_rate(f: &PiecewiseLinearPath, spec: &CoefficientSpec) -> f64 {
    let outside = f
        .slopes()
        .any(|d| !(d[0] > 0.0 && d[1] > 0.0 && d[2] * d[2] < d[0] * d[1]));
    if outside {
        return f64::INFINITY;
    }
    f.integrate_cells(spec, |t, d| {
        let (s1, s2, rho) = spec.eval_unchecked(t);
        GaussianQuadCgf::new(rho).legendre(&[d[0] / (s1 * s1), d[1] / (s2 * s2), d[2] / (s1 * s2)])
    })
}

/// ∫₀¹ ½⟨φ̇, Σ_t⁻¹φ̇⟩ dt with the closed-form Σ_t⁻¹.
pub fn pathwise_mdp_rate(phi: &PiecewiseLinearPath, spec: &CoefficientSpec) -> Result<f64> {
    let max_rho = spec.max_abs_rho();
    if max_rho >= 1.0 - spec.rho_margin() {
        return Err(CovolError::domain(
            "rho",
            max_rho,
            "reaches the rho_margin boundary where the inverse local covariance blows up",
        ));
    }
    Ok(phi.integrate_cells(spec, |t, d| {
        let (s1, s2, rho) = spec.eval_unchecked(t);
        // Σ_t⁻¹ = K_t⁻¹ / 2
        let inv = kernel_inverse(s1, s2, rho);
        let mut q = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                q += d[i] * inv[(i, j)] * d[j];
            }
        }
        0.25 * q
    }))
}
