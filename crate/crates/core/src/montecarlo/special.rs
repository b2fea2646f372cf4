//! Exact chi-square tails for the realized variance under constant volatility.
//!
//! For constant σ and no drift, nQ₁ⁿ/σ² ~ χ²ₙ, so
//! P(Q₁ⁿ ≥ q) = Q(n/2, nq/(2σ²)) with Q the regularized upper incomplete gamma.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{CovolError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = ">=")]
    Geq,
    #[serde(rename = "<=")]
    Leq,
}

impl Direction {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Direction::Geq => value >= threshold,
            Direction::Leq => value <= threshold,
        }
    }
}

fn check_args(q: f64, n: usize, sigma: f64) -> Result<()> {
    if n == 0 {
        return Err(CovolError::domain("n", 0.0, "at least one interval is required"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(CovolError::domain("sigma", sigma, "must be positive"));
    }
    if q.is_nan() {
        return Err(CovolError::domain("q", q, "must be a number"));
    }
    Ok(())
}

/// P(Q₁ⁿ ≥ q) or P(Q₁ⁿ ≤ q) for constant volatility σ and no drift.
pub fn chi_square_oracle(q: f64, n: usize, sigma: f64, direction: Direction) -> Result<f64> {
    check_args(q, n, sigma)?;
    if q <= 0.0 {
        return Ok(match direction {
            Direction::Geq => 1.0,
            Direction::Leq => 0.0,
        });
    }
    let a = 0.5 * n as f64;
    let x = a * q / (sigma * sigma);
    Ok(match direction {
        Direction::Geq => gamma_ur(a, x),
        Direction::Leq => gamma_lr(a, x),
    })
}

/// log of [`chi_square_oracle`].
pub fn log_chi_square_oracle(q: f64, n: usize, sigma: f64, direction: Direction) -> Result<f64> {
    let p = chi_square_oracle(q, n, sigma, direction)?;
    if p > 0.0 {
        Ok(p.ln())
    } else {
        Err(CovolError::Numerical(format!(
            "chi-square tail underflows at q = {q}, n = {n}"
        )))
    }
}
