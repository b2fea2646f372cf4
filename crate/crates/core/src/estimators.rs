//! Realized variances, covariance and the statistics derived from them.

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSpec, Drift, Integrand};
use crate::error::{CovolError, Result};
use crate::simulate::SamplePath;

/// (Q₁, Q₂, C) at one time point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RealizedVector {
    pub q1: f64,
    pub q2: f64,
    pub c: f64,
}

impl RealizedVector {
    pub fn new(q1: f64, q2: f64, c: f64) -> Self {
        RealizedVector { q1, q2, c }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.q1, self.q2, self.c]
    }

    fn accumulate(&mut self, d1: f64, d2: f64) {
        self.q1 += d1 * d1;
        self.q2 += d2 * d2;
        self.c += d1 * d2;
    }
}

impl From<[f64; 3]> for RealizedVector {
    fn from(v: [f64; 3]) -> Self {
        RealizedVector::new(v[0], v[1], v[2])
    }
}

/// Asset index ℓ ∈ {1, 2} for the realized beta β_ℓ = C/Q_ℓ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Asset {
    First,
    Second,
}

impl Asset {
    /// 0-based component index of Q_ℓ.
    pub fn index(self) -> usize {
        match self {
            Asset::First => 0,
            Asset::Second => 1,
        }
    }

    /// (own, other) out of a pair ordered (asset 1, asset 2).
    pub fn own_other<T>(self, first: T, second: T) -> (T, T) {
        match self {
            Asset::First => (first, second),
            Asset::Second => (second, first),
        }
    }
}

/// Step-function trajectory of the realized vector at the grid points t_k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizedTrajectory {
    pub n: usize,
    pub values: Vec<RealizedVector>,
}

impl RealizedTrajectory {
    fn from_increments<I: Iterator<Item = (f64, f64)>>(n: usize, incs: I) -> Self {
        let mut values = Vec::with_capacity(n + 1);
        let mut acc = RealizedVector::default();
        values.push(acc);
        for (d1, d2) in incs {
            acc.accumulate(d1, d2);
            values.push(acc);
        }
        RealizedTrajectory { n, values }
    }

    /// Value of the step function at t ∈ [0, 1].
    pub fn at(&self, t: f64) -> RealizedVector {
        self.values[index_of(self.n, t)]
    }
}

/// ⌊nt⌋ clamped to [0, n]; the small guard keeps t = k/n on index k.
fn index_of(n: usize, t: f64) -> usize {
    let k = (n as f64 * t + 1e-9).floor();
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(n)
    }
}

fn sum_increments<I: Iterator<Item = (f64, f64)>>(incs: I, upto: usize) -> RealizedVector {
    let mut v = RealizedVector::default();
    for (d1, d2) in incs.take(upto) {
        v.accumulate(d1, d2);
    }
    v
}

/// V_tⁿ(X): sums over k = 1..⌊nt⌋ of squared and cross increments.
pub fn realized_vector(path: &SamplePath, t: f64) -> RealizedVector {
    sum_increments(path.increments(), index_of(path.n(), t))
}

pub fn realized_trajectory(path: &SamplePath) -> RealizedTrajectory {
    RealizedTrajectory::from_increments(path.n(), path.increments())
}

/// V_tⁿ(X − Y) from the retained martingale increments.
pub fn drift_corrected_vector(path: &SamplePath, t: f64) -> Result<RealizedVector> {
    let m = path
        .martingale_part()
        .ok_or_else(|| CovolError::Contract("path carries no martingale part".into()))?;
    let incs = m.dm1.iter().copied().zip(m.dm2.iter().copied());
    Ok(sum_increments(incs, index_of(path.n(), t)))
}

/// Ṽ_tⁿ: increments corrected by b(t_{k−1}, X_{t_{k−1}})/n before squaring.
pub fn tilde_vector(path: &SamplePath, spec: &CoefficientSpec, t: f64) -> Result<RealizedVector> {
    let drift = spec.drift();
    if matches!(drift, Drift::None) {
        return Err(CovolError::Contract(
            "tilde_vector needs a drift; use realized_vector for drift None".into(),
        ));
    }
    let n = path.n();
    let h = 1.0 / n as f64;
    let (x1, x2) = (path.x1(), path.x2());
    let incs = (0..n).map(|k| {
        let b = drift.eval(k as f64 * h, [x1[k], x2[k]]);
        (x1[k + 1] - x1[k] - b[0] * h, x2[k + 1] - x2[k] - b[1] * h)
    });
    Ok(sum_increments(incs, index_of(n, t)))
}

/// ϱ = C/√(Q₁Q₂).
pub fn realized_correlation(v: &RealizedVector) -> Result<f64> {
    if !(v.q1 > 0.0 && v.q2 > 0.0) {
        return Err(CovolError::DegeneratePath("realized correlation needs q1 > 0 and q2 > 0"));
    }
    Ok((v.c / (v.q1 * v.q2).sqrt()).clamp(-1.0, 1.0))
}

/// β_ℓ = C/Q_ℓ.
pub fn realized_beta(v: &RealizedVector, asset: Asset) -> Result<f64> {
    let q = v.as_array()[asset.index()];
    if !(q > 0.0) {
        return Err(CovolError::DegeneratePath("realized beta needs q_ℓ > 0"));
    }
    Ok(v.c / q)
}

/// [V]_t = (∫₀ᵗσ₁², ∫₀ᵗσ₂², ∫₀ᵗσ₁σ₂ρ).
pub fn integrated_truth(spec: &CoefficientSpec, t: f64) -> Result<RealizedVector> {
    Ok(RealizedVector::new(
        spec.integrate(Integrand::Sigma1Sq, 0.0, t)?,
        spec.integrate(Integrand::Sigma2Sq, 0.0, t)?,
        spec.integrate(Integrand::Covariation, 0.0, t)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefFn, DEFAULT_RHO_MARGIN};
    use crate::simulate::{derive_seed, simulate_path, PathSampler};
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-14
    }

    #[test]
    fn direct_arithmetic() {
        let p = SamplePath::from_increments(&[0.1, -0.2], &[0.3, 0.1], 0).unwrap();
        let v = realized_vector(&p, 1.0);
        assert!(close(v.q1, 0.05) && close(v.q2, 0.10) && close(v.c, 0.01));
        assert_eq!(realized_vector(&p, 0.0), RealizedVector::default());
        assert!((realized_correlation(&v).unwrap() - 0.01 / 0.005f64.sqrt()).abs() < 1e-12);
        assert!(close(realized_beta(&v, Asset::First).unwrap(), 0.2));
        assert!(close(realized_beta(&RealizedVector::new(1.0, 1.0, 0.3), Asset::Second).unwrap(), 0.3));
    }

    #[test]
    fn identical_and_mirrored_series() {
        let d = [0.3, -0.1, 0.7, 0.05];
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        let dbl: Vec<f64> = d.iter().map(|v| 2.0 * v).collect();
        let same = realized_vector(&SamplePath::from_increments(&d, &d, 0).unwrap(), 1.0);
        assert_eq!(same.q1, same.c);
        assert_eq!(same.q2, same.c);
        assert_eq!(realized_correlation(&same).unwrap(), 1.0);
        let mirror = realized_vector(&SamplePath::from_increments(&d, &neg, 0).unwrap(), 1.0);
        assert_eq!(realized_correlation(&mirror).unwrap(), -1.0);
        let scaled = realized_vector(&SamplePath::from_increments(&d, &dbl, 0).unwrap(), 1.0);
        assert!(close(realized_beta(&scaled, Asset::First).unwrap(), 2.0));
    }

    #[test]
    fn degenerate_statistics_are_errors() {
        let v = RealizedVector::new(0.0, 1.0, 0.0);
        assert!(matches!(realized_correlation(&v), Err(CovolError::DegeneratePath(_))));
        assert!(realized_beta(&v, Asset::First).is_err());
        assert!(realized_beta(&v, Asset::Second).is_ok());
    }

    #[test]
    fn floor_index_convention() {
        let p = SamplePath::from_increments(&[1.0; 10], &[1.0; 10], 0).unwrap();
        assert_eq!(realized_vector(&p, 0.3).q1, 3.0);
        assert_eq!(realized_vector(&p, 0.35).q1, 3.0);
        assert_eq!(realized_vector(&p, 0.7).q1, 7.0);
        assert_eq!(realized_vector(&p, 1.0).q1, 10.0);
        assert_eq!(realized_trajectory(&p).at(0.7), realized_vector(&p, 0.7));
    }

    #[test]
    fn truth_examples() {
        let spec = CoefficientSpec::constant(1.0, 2.0, 0.5).unwrap();
        assert_eq!(integrated_truth(&spec, 1.0).unwrap(), RealizedVector::new(1.0, 4.0, 1.0));
        assert_eq!(integrated_truth(&spec, 0.0).unwrap(), RealizedVector::default());
        let eps = DEFAULT_RHO_MARGIN;
        let spec = CoefficientSpec::new(
            CoefFn::Constant(1.0),
            CoefFn::Constant(1.0),
            CoefFn::Grid(vec![0.0, 1.0 - eps]),
            Drift::None,
            eps,
        )
        .unwrap();
        assert!((integrated_truth(&spec, 1.0).unwrap().c - (1.0 - eps) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn drift_none_correction_is_identity() {
        let spec = CoefficientSpec::constant(1.0, 1.0, 0.3).unwrap();
        let p = simulate_path(&spec, 30, 9).unwrap();
        assert_eq!(drift_corrected_vector(&p, 1.0).unwrap(), realized_vector(&p, 1.0));
        let bare = SamplePath::from_observations(p.x1().to_vec(), p.x2().to_vec(), 9).unwrap();
        assert!(matches!(drift_corrected_vector(&bare, 1.0), Err(CovolError::Contract(_))));
        assert!(tilde_vector(&p, &spec, 1.0).is_err());
    }

    #[test]
    fn constant_time_drift_shifts_increments() {
        let spec = CoefficientSpec::constant(1.0, 1.0, 0.0)
            .unwrap()
            .with_drift(Drift::TimeOnly { b1: CoefFn::Constant(1.0), b2: CoefFn::Constant(1.0) })
            .unwrap();
        let n = 20;
        let p = simulate_path(&spec, n, 3).unwrap();
        let m = p.martingale_part().unwrap();
        for k in 0..n {
            assert!((p.increment(k).0 - 1.0 / n as f64 - m.dm1[k]).abs() < 1e-14);
        }
        let corrected = drift_corrected_vector(&p, 1.0).unwrap();
        let tilde = tilde_vector(&p, &spec, 1.0).unwrap();
        assert!((corrected.q1 - tilde.q1).abs() < 1e-12);
        assert!((corrected.c - tilde.c).abs() < 1e-12);
    }

    #[test]
    fn large_drift_decomposition() {
        let b = 100.0;
        let n = 1000;
        let spec = CoefficientSpec::constant(1.0, 1.0, 0.0)
            .unwrap()
            .with_drift(Drift::TimeOnly { b1: CoefFn::Constant(b), b2: CoefFn::Constant(0.0) })
            .unwrap();
        let p = simulate_path(&spec, n, 21).unwrap();
        let raw = realized_vector(&p, 1.0);
        let corrected = drift_corrected_vector(&p, 1.0).unwrap();
        let m = p.martingale_part().unwrap();
        let dy = b / n as f64;
        let cross: f64 = m.dm1.iter().map(|d| 2.0 * d * dy).sum();
        let square = n as f64 * dy * dy;
        assert!((raw.q1 - (corrected.q1 + cross + square)).abs() < 1e-10);
        assert!(corrected.q1 < 2.0 && raw.q1 > 5.0);
    }

    #[test]
    fn zero_drift_functions_leave_tilde_unchanged() {
        let spec = CoefficientSpec::constant(1.0, 1.0, 0.4)
            .unwrap()
            .with_drift(Drift::TimeOnly { b1: CoefFn::Constant(0.0), b2: CoefFn::Constant(0.0) })
            .unwrap();
        let p = simulate_path(&spec, 25, 6).unwrap();
        assert_eq!(tilde_vector(&p, &spec, 1.0).unwrap(), realized_vector(&p, 1.0));
    }

    #[test]
    fn tilde_tracks_martingale_vector_under_mean_reversion() {
        let spec = CoefficientSpec::constant(1.0, 1.0, 0.3)
            .unwrap()
            .with_drift(Drift::LinearMeanReverting { kappa: [1.0, 1.0], theta: [0.0, 0.0] })
            .unwrap();
        let mut errs = Vec::new();
        for n in [100, 400, 1600] {
            let sampler = PathSampler::new(&spec, n).unwrap().with_initial([2.0, -2.0]);
            let mut total = 0.0;
            let reps = 200;
            for i in 0..reps {
                let p = sampler.sample(derive_seed(17, i));
                let a = tilde_vector(&p, &spec, 1.0).unwrap();
                let b = drift_corrected_vector(&p, 1.0).unwrap();
                total += (a.q1 - b.q1).abs() + (a.q2 - b.q2).abs() + (a.c - b.c).abs();
            }
            errs.push(total / reps as f64);
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn trajectory_invariants(seed in any::<u64>(), rho in -0.99f64..0.99, n in 1usize..60) {
            let spec = CoefficientSpec::constant(1.0, 0.5, rho).unwrap();
            let p = simulate_path(&spec, n, seed).unwrap();
            let traj = realized_trajectory(&p);
            prop_assert_eq!(traj.values[0], RealizedVector::default());
            for w in traj.values.windows(2) {
                prop_assert!(w[1].q1 >= w[0].q1 && w[1].q2 >= w[0].q2);
            }
            for v in &traj.values {
                prop_assert!(v.c * v.c <= v.q1 * v.q2 * (1.0 + 1e-12));
            }
        }
    }
}
