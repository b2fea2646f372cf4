//! Fixtures shared by the benchmarks.

use covol_core::{CoefFn, CoefficientSpec, Drift, DEFAULT_RHO_MARGIN};

pub fn constant_spec() -> CoefficientSpec {
    CoefficientSpec::constant(1.0, 1.0, 0.5).unwrap()
}

/// Piecewise-constant coefficients on a few dozen knots.
pub fn tabulated_spec() -> CoefficientSpec {
    let grid = |f: fn(f64) -> f64, k: usize| CoefFn::Grid((0..k).map(|i| f(i as f64 / k as f64)).collect());
    CoefficientSpec::new(
        grid(|t| 1.0 + 0.3 * (6.0 * t).sin(), 24),
        grid(|t| 0.8 + 0.2 * t, 16),
        grid(|t| 0.6 * (3.0 * t).cos(), 20),
        Drift::None,
        DEFAULT_RHO_MARGIN,
    )
    .unwrap()
}
