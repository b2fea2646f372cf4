//! Deterministic model coefficients σ₁(t), σ₂(t), ρ(t) and the drift, plus the
//! per-interval Gaussian moments every other module consumes.

use serde::{Deserialize, Serialize};

use crate::error::{CovolError, Result};
use crate::quadrature;

pub const DEFAULT_RHO_MARGIN: f64 = 1e-3;

/// A scalar function on [0, 1]: a constant or a piecewise-linear table on a
/// uniform grid of `M + 1` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefFn {
    Constant(f64),
    Grid(Vec<f64>),
}

impl CoefFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            CoefFn::Constant(v) => *v,
            CoefFn::Grid(values) => {
                let m = values.len() - 1;
                let pos = t.clamp(0.0, 1.0) * m as f64;
                let j = (pos.floor() as usize).min(m - 1);
                let frac = pos - j as f64;
                values[j] + frac * (values[j + 1] - values[j])
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CoefFn::Constant(_))
    }

    /// Values at which the function is pinned: the constant or the grid table.
    fn pinned_values(&self) -> &[f64] {
        match self {
            CoefFn::Constant(v) => std::slice::from_ref(v),
            CoefFn::Grid(values) => values,
        }
    }

    fn knots(&self) -> Vec<f64> {
        match self {
            CoefFn::Constant(_) => vec![0.0, 1.0],
            CoefFn::Grid(values) => {
                let m = values.len() - 1;
                (0..=m).map(|j| j as f64 / m as f64).collect()
            }
        }
    }

    fn check_shape(&self, name: &str) -> Result<()> {
        if let CoefFn::Grid(values) = self {
            if values.len() < 2 {
                return Err(CovolError::InvalidSpec(format!(
                    "{name}: a grid needs at least two points covering [0, 1]"
                )));
            }
        }
        if self.pinned_values().iter().any(|v| !v.is_finite()) {
            return Err(CovolError::InvalidSpec(format!("{name}: non-finite value")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Drift {
    None,
    /// b_ℓ(t) independent of the state.
    TimeOnly { b1: CoefFn, b2: CoefFn },
    /// b_ℓ(t, x) = κ_ℓ (θ_ℓ − x_ℓ).
    LinearMeanReverting { kappa: [f64; 2], theta: [f64; 2] },
}

impl Drift {
    pub fn eval(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        match self {
            Drift::None => [0.0, 0.0],
            Drift::TimeOnly { b1, b2 } => [b1.eval(t), b2.eval(t)],
            Drift::LinearMeanReverting { kappa, theta } => [
                kappa[0] * (theta[0] - x[0]),
                kappa[1] * (theta[1] - x[1]),
            ],
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Drift::None)
    }
}

/// Integrands available to [`CoefficientSpec::integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrand {
    Sigma1Sq,
    Sigma2Sq,
    /// σ₁σ₂ρ
    Covariation,
    Sigma1Pow4,
    Sigma2Pow4,
    /// σ₁²σ₂²ρ²
    CrossSqRhoSq,
    /// σ₁³σ₂ρ
    Sigma1CubedSigma2Rho,
    /// σ₁σ₂³ρ
    Sigma1Sigma2CubedRho,
    /// σ₁²σ₂²(1+ρ²)/2
    HalfCrossOnePlusRhoSq,
}

impl Integrand {
    pub fn apply(self, s1: f64, s2: f64, rho: f64) -> f64 {
        match self {
            Integrand::Sigma1Sq => s1 * s1,
            Integrand::Sigma2Sq => s2 * s2,
            Integrand::Covariation => s1 * s2 * rho,
            Integrand::Sigma1Pow4 => s1.powi(4),
            Integrand::Sigma2Pow4 => s2.powi(4),
            Integrand::CrossSqRhoSq => (s1 * s2 * rho).powi(2),
            Integrand::Sigma1CubedSigma2Rho => s1.powi(3) * s2 * rho,
            Integrand::Sigma1Sigma2CubedRho => s1 * s2.powi(3) * rho,
            Integrand::HalfCrossOnePlusRhoSq => 0.5 * (s1 * s2).powi(2) * (1.0 + rho * rho),
        }
    }
}

/// Validated model coefficients. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDoc", into = "SpecDoc")]
pub struct CoefficientSpec {
    sigma1: CoefFn,
    sigma2: CoefFn,
    rho: CoefFn,
    drift: Drift,
    rho_margin: f64,
    /// Union of every tabulation knot, sorted; quadrature cells.
    knots: Vec<f64>,
}

impl CoefficientSpec {
    pub fn new(sigma1: CoefFn, sigma2: CoefFn, rho: CoefFn, drift: Drift, rho_margin: f64) -> Result<Self> {
        if !(rho_margin > 0.0 && rho_margin < 1.0) {
            return Err(CovolError::InvalidSpec(format!(
                "rho_margin must lie in (0, 1), got {rho_margin}"
            )));
        }
        sigma1.check_shape("sigma1")?;
        sigma2.check_shape("sigma2")?;
        rho.check_shape("rho")?;
        for (name, f) in [("sigma1", &sigma1), ("sigma2", &sigma2)] {
            if let Some(v) = f.pinned_values().iter().find(|&&v| v <= 0.0) {
                return Err(CovolError::InvalidSpec(format!(
                    "{name} must be strictly positive, found {v}"
                )));
            }
        }
        if let Some(v) = rho.pinned_values().iter().find(|&&v| v.abs() > 1.0 - rho_margin) {
            return Err(CovolError::InvalidSpec(format!(
                "rho: |{v}| exceeds 1 - rho_margin = {}",
                1.0 - rho_margin
            )));
        }
        let mut knots = [&sigma1, &sigma2, &rho]
            .iter()
            .flat_map(|f| f.knots())
            .collect::<Vec<_>>();
        match &drift {
            Drift::None => {}
            Drift::TimeOnly { b1, b2 } => {
                b1.check_shape("drift.b1")?;
                b2.check_shape("drift.b2")?;
                knots.extend(b1.knots());
                knots.extend(b2.knots());
            }
            Drift::LinearMeanReverting { kappa, theta } => {
                if kappa.iter().chain(theta.iter()).any(|v| !v.is_finite()) {
                    return Err(CovolError::InvalidSpec(
                        "drift.linear: kappa and theta must be finite".into(),
                    ));
                }
            }
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        Ok(CoefficientSpec {
            sigma1,
            sigma2,
            rho,
            drift,
            rho_margin,
            knots,
        })
    }

    /// Constant coefficients, no drift, default margin.
    pub fn constant(sigma1: f64, sigma2: f64, rho: f64) -> Result<Self> {
        Self::new(
            CoefFn::Constant(sigma1),
            CoefFn::Constant(sigma2),
            CoefFn::Constant(rho),
            Drift::None,
            DEFAULT_RHO_MARGIN,
        )
    }

    /// Same coefficients with a different drift.
    pub fn with_drift(&self, drift: Drift) -> Result<Self> {
        Self::new(
            self.sigma1.clone(),
            self.sigma2.clone(),
            self.rho.clone(),
            drift,
            self.rho_margin,
        )
    }

    pub fn sigma1(&self) -> &CoefFn {
        &self.sigma1
    }

    pub fn sigma2(&self) -> &CoefFn {
        &self.sigma2
    }

    pub fn rho(&self) -> &CoefFn {
        &self.rho
    }

    pub fn drift(&self) -> &Drift {
        &self.drift
    }

    pub fn rho_margin(&self) -> f64 {
        self.rho_margin
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Both volatilities constant (ρ may vary).
    pub fn has_constant_volatility(&self) -> bool {
        self.sigma1.is_constant() && self.sigma2.is_constant()
    }

    pub fn is_constant(&self) -> bool {
        self.has_constant_volatility() && self.rho.is_constant()
    }

    pub fn max_abs_rho(&self) -> f64 {
        self.rho
            .pinned_values()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// (σ₁, σ₂, ρ) at `t`.
    pub fn evaluate(&self, t: f64) -> Result<(f64, f64, f64)> {
        if !(0.0..=1.0).contains(&t) {
            return Err(CovolError::domain("t", t, "must lie in [0, 1]"));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> (f64, f64, f64) {
        (self.sigma1.eval(t), self.sigma2.eval(t), self.rho.eval(t))
    }

    /// ∫ₛᵘ of the selected integrand.
    pub fn integrate(&self, integrand: Integrand, s: f64, u: f64) -> Result<f64> {
        check_interval(s, u)?;
        Ok(self.integrate_with(s, u, |s1, s2, rho| integrand.apply(s1, s2, rho)))
    }

    /// ∫ₛᵘ g(σ₁(t), σ₂(t), ρ(t)) dt for an arbitrary `g`, cellwise.
    pub fn integrate_with<G: FnMut(f64, f64, f64) -> f64>(&self, s: f64, u: f64, mut g: G) -> f64 {
        quadrature::integrate_piecewise(&self.knots, s, u, |t| {
            let (s1, s2, rho) = self.eval_unchecked(t);
            g(s1, s2, rho)
        })
    }

    /// ∫ₛᵘ b(t) dt for a time-only drift; zero otherwise.
    pub fn drift_integral(&self, s: f64, u: f64) -> [f64; 2] {
        match &self.drift {
            Drift::TimeOnly { b1, b2 } => [
                quadrature::integrate_piecewise(&self.knots, s, u, |t| b1.eval(t)),
                quadrature::integrate_piecewise(&self.knots, s, u, |t| b2.eval(t)),
            ],
            _ => [0.0, 0.0],
        }
    }

    /// Moments of the martingale increments over each [(k−1)/n, k/n].
    pub fn interval_moments(&self, n: usize) -> Result<IncrementMoments> {
        IncrementMoments::new(self, n)
    }
}

fn check_interval(s: f64, u: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(CovolError::domain("s", s, "must lie in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(CovolError::domain("u", u, "must lie in [0, 1]"));
    }
    if s > u {
        return Err(CovolError::domain("s", s, "lower limit exceeds upper limit"));
    }
    Ok(())
}

/// Per-interval integrals a_{ℓ,k}, ϑ_k and normalized correlations c_k.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementMoments {
    pub n: usize,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub vartheta: Vec<f64>,
    pub c: Vec<f64>,
}

impl IncrementMoments {
    fn new(spec: &CoefficientSpec, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(CovolError::domain("n", 0.0, "at least one interval is required"));
        }
        let mut a1 = Vec::with_capacity(n);
        let mut a2 = Vec::with_capacity(n);
        let mut vartheta = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        let nf = n as f64;
        for k in 1..=n {
            let s = (k - 1) as f64 / nf;
            let u = k as f64 / nf;
            let m1 = spec.integrate_with(s, u, |s1, _, _| s1 * s1);
            let m2 = spec.integrate_with(s, u, |_, s2, _| s2 * s2);
            let cov = spec.integrate_with(s, u, |s1, s2, rho| s1 * s2 * rho);
            if !(m1 > 0.0 && m2 > 0.0) {
                return Err(CovolError::Internal(format!(
                    "non-positive interval variance on interval {k}: a1 = {m1}, a2 = {m2}"
                )));
            }
            a1.push(m1);
            a2.push(m2);
            vartheta.push(cov);
            c.push(cov / (m1.sqrt() * m2.sqrt()));
        }
        Ok(IncrementMoments {
            n,
            a1,
            a2,
            vartheta,
            c,
        })
    }

    /// Increment covariance [[a₁, ϑ], [ϑ, a₂]] on interval `k` (0-based).
    pub fn covariance(&self, k: usize) -> [[f64; 2]; 2] {
        [[self.a1[k], self.vartheta[k]], [self.vartheta[k], self.a2[k]]]
    }
}

// JSON document shape for CoefficientSpec.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    sigma1: CoefFn,
    sigma2: CoefFn,
    rho: CoefFn,
    #[serde(default = "DriftDoc::none")]
    drift: DriftDoc,
    #[serde(default = "default_margin")]
    rho_margin: f64,
}

fn default_margin() -> f64 {
    DEFAULT_RHO_MARGIN
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum DriftDoc {
    None(bool),
    TimeOnly(TimeOnlyDoc),
    Linear(LinearDoc),
}

impl DriftDoc {
    fn none() -> Self {
        DriftDoc::None(true)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeOnlyDoc {
    b1: CoefFn,
    b2: CoefFn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearDoc {
    kappa: [f64; 2],
    theta: [f64; 2],
}

impl TryFrom<SpecDoc> for CoefficientSpec {
    type Error = CovolError;

    fn try_from(doc: SpecDoc) -> Result<Self> {
        let drift = match doc.drift {
            DriftDoc::None(true) => Drift::None,
            DriftDoc::None(false) => {
                return Err(CovolError::InvalidSpec(
                    "drift: {\"none\": false} is not a drift; give time_only or linear".into(),
                ))
            }
            DriftDoc::TimeOnly(TimeOnlyDoc { b1, b2 }) => Drift::TimeOnly { b1, b2 },
            DriftDoc::Linear(LinearDoc { kappa, theta }) => Drift::LinearMeanReverting { kappa, theta },
        };
        CoefficientSpec::new(doc.sigma1, doc.sigma2, doc.rho, drift, doc.rho_margin)
    }
}

impl From<CoefficientSpec> for SpecDoc {
    fn from(spec: CoefficientSpec) -> Self {
        let drift = match spec.drift {
            Drift::None => DriftDoc::None(true),
            Drift::TimeOnly { b1, b2 } => DriftDoc::TimeOnly(TimeOnlyDoc { b1, b2 }),
            Drift::LinearMeanReverting { kappa, theta } => DriftDoc::Linear(LinearDoc { kappa, theta }),
        };
        SpecDoc {
            sigma1: spec.sigma1,
            sigma2: spec.sigma2,
            rho: spec.rho,
            drift,
            rho_margin: spec.rho_margin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(values: &[f64]) -> CoefFn {
        CoefFn::Grid(values.to_vec())
    }

    fn spec(s1: CoefFn, s2: CoefFn, rho: CoefFn) -> CoefficientSpec {
        CoefficientSpec::new(s1, s2, rho, Drift::None, DEFAULT_RHO_MARGIN).unwrap()
    }

    /// Composite trapezoid rule with `m` panels; independent of the GL path.
    fn trapezoid<F: Fn(f64) -> f64>(f: F, s: f64, u: f64, m: usize) -> f64 {
        let h = (u - s) / m as f64;
        let inner: f64 = (1..m).map(|i| f(s + i as f64 * h)).sum();
        h * (0.5 * f(s) + inner + 0.5 * f(u))
    }

    #[test]
    fn evaluate_constant_and_interpolated() {
        let c = CoefficientSpec::constant(1.0, 2.0, 0.5).unwrap();
        assert_eq!(c.evaluate(0.3).unwrap(), (1.0, 2.0, 0.5));

        let eps = DEFAULT_RHO_MARGIN;
        let s = spec(CoefFn::Constant(1.0), CoefFn::Constant(1.0), grid(&[0.0, 1.0 - eps]));
        let (_, _, rho) = s.evaluate(0.5).unwrap();
        assert!((rho - (1.0 - eps) / 2.0).abs() < 1e-15);

        let s = spec(grid(&[1.0, 3.0]), CoefFn::Constant(1.0), CoefFn::Constant(0.0));
        assert!((s.evaluate(0.25).unwrap().0 - 1.5).abs() < 1e-15);
    }

    #[test]
    fn evaluate_rejects_out_of_range_time() {
        let c = CoefficientSpec::constant(1.0, 1.0, 0.0).unwrap();
        assert!(matches!(c.evaluate(1.5), Err(CovolError::Domain { .. })));
        assert!(matches!(c.evaluate(-0.1), Err(CovolError::Domain { .. })));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(CoefficientSpec::constant(0.0, 1.0, 0.0).is_err());
        assert!(CoefficientSpec::constant(1.0, -1.0, 0.0).is_err());
        assert!(CoefficientSpec::constant(1.0, 1.0, 0.9995).is_err());
        assert!(CoefficientSpec::constant(1.0, 1.0, 0.999).is_ok());
        let bad_grid = CoefficientSpec::new(
            grid(&[1.0]),
            CoefFn::Constant(1.0),
            CoefFn::Constant(0.0),
            Drift::None,
            DEFAULT_RHO_MARGIN,
        );
        assert!(bad_grid.is_err());
    }

    #[test]
    fn integrate_examples() {
        let c = CoefficientSpec::constant(1.0, 1.0, 0.5).unwrap();
        assert!((c.integrate(Integrand::Sigma1Sq, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let v = c.integrate(Integrand::HalfCrossOnePlusRhoSq, 0.0, 1.0).unwrap();
        assert!((v - 0.625).abs() < 1e-15);

        let s = spec(grid(&[1.0, 3.0]), CoefFn::Constant(1.0), CoefFn::Constant(0.0));
        let v = s.integrate(Integrand::Sigma1Sq, 0.0, 1.0).unwrap();
        let oracle = trapezoid(|t| (1.0 + 2.0 * t).powi(2), 0.0, 1.0, 20_000);
        assert!((oracle - 13.0 / 3.0).abs() < 1e-7);
        assert!((v - 13.0 / 3.0).abs() < 1e-13);

        assert!(matches!(
            c.integrate(Integrand::Sigma1Sq, 0.6, 0.4),
            Err(CovolError::Domain { .. })
        ));
    }

    #[test]
    fn interval_moment_examples() {
        let m = CoefficientSpec::constant(1.0, 1.0, 0.5).unwrap().interval_moments(4).unwrap();
        for k in 0..4 {
            assert!((m.a1[k] - 0.25).abs() < 1e-15);
            assert!((m.a2[k] - 0.25).abs() < 1e-15);
            assert!((m.vartheta[k] - 0.125).abs() < 1e-15);
            assert!((m.c[k] - 0.5).abs() < 1e-15);
        }

        let m = CoefficientSpec::constant(1.0, 2.0, 0.0).unwrap().interval_moments(2).unwrap();
        for k in 0..2 {
            assert!((m.a1[k] - 0.5).abs() < 1e-15);
            assert!((m.a2[k] - 2.0).abs() < 1e-15);
            assert_eq!(m.vartheta[k], 0.0);
            assert_eq!(m.c[k], 0.0);
        }

        let s = spec(CoefFn::Constant(1.0), CoefFn::Constant(1.0), grid(&[0.0, 0.8]));
        let m = s.interval_moments(2).unwrap();
        let oracle = trapezoid(|t| 0.8 * t, 0.0, 0.5, 10_000) / 0.5;
        assert!((oracle - 0.2).abs() < 1e-12);
        assert!((m.c[0] - 0.2).abs() < 1e-14);

        assert!(s.interval_moments(0).is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let doc = r#"{"sigma1": {"constant": 1.0}, "sigma2": {"grid": [1.0, 2.0, 1.5]},
                      "rho": {"constant": 0.3}, "drift": {"linear": {"kappa": [1.0, 2.0], "theta": [0.0, 0.1]}},
                      "rho_margin": 0.001}"#;
        let s: CoefficientSpec = serde_json::from_str(doc).unwrap();
        assert_eq!(
            s.drift(),
            &Drift::LinearMeanReverting { kappa: [1.0, 2.0], theta: [0.0, 0.1] }
        );
        let back: CoefficientSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);

        let none = r#"{"sigma1": {"constant": 1.0}, "sigma2": {"constant": 1.0}, "rho": {"constant": 0.0},
                       "drift": {"none": true}}"#;
        let s: CoefficientSpec = serde_json::from_str(none).unwrap();
        assert!(s.drift().is_none());
        assert_eq!(s.rho_margin(), DEFAULT_RHO_MARGIN);

        let time_only = r#"{"sigma1": {"constant": 1.0}, "sigma2": {"constant": 1.0}, "rho": {"constant": 0.0},
                            "drift": {"time_only": {"b1": {"constant": 1.0}, "b2": {"grid": [0.0, 2.0]}}}}"#;
        let s: CoefficientSpec = serde_json::from_str(time_only).unwrap();
        let b = s.drift_integral(0.0, 1.0);
        assert!((b[0] - 1.0).abs() < 1e-15 && (b[1] - 1.0).abs() < 1e-15);

        let unknown = r#"{"sigma1": {"constant": 1.0}, "sigma2": {"constant": 1.0}, "rho": {"constant": 0.0},
                          "volatility": 3}"#;
        let err = serde_json::from_str::<CoefficientSpec>(unknown).unwrap_err().to_string();
        assert!(err.contains("volatility"), "{err}");

        let bad_rho = r#"{"sigma1": {"constant": 1.0}, "sigma2": {"constant": 1.0}, "rho": {"constant": 1.0}}"#;
        assert!(serde_json::from_str::<CoefficientSpec>(bad_rho).is_err());
    }

    fn arb_positive_grid() -> impl Strategy<Value = CoefFn> {
        prop_oneof![
            (0.2..3.0f64).prop_map(CoefFn::Constant),
            prop::collection::vec(0.2..3.0f64, 2..7).prop_map(CoefFn::Grid),
        ]
    }

    fn arb_rho() -> impl Strategy<Value = CoefFn> {
        prop_oneof![
            (-0.95..0.95f64).prop_map(CoefFn::Constant),
            prop::collection::vec(-0.95..0.95f64, 2..7).prop_map(CoefFn::Grid),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn interval_additivity_and_cauchy_schwarz(
            s1 in arb_positive_grid(), s2 in arb_positive_grid(), rho in arb_rho(), n in 1usize..400
        ) {
            let s = spec(s1, s2, rho);
            let m = s.interval_moments(n).unwrap();
            let whole = s.integrate(Integrand::Sigma1Sq, 0.0, 1.0).unwrap();
            let sum: f64 = m.a1.iter().sum();
            prop_assert!((sum - whole).abs() <= 1e-10 * whole);
            let bound = s.max_abs_rho();
            for k in 0..n {
                prop_assert!(m.a1[k] > 0.0 && m.a2[k] > 0.0);
                prop_assert!(m.c[k].abs() <= bound + 1e-12);
                let back = m.c[k] * m.a1[k].sqrt() * m.a2[k].sqrt();
                prop_assert!((back - m.vartheta[k]).abs() <= 1e-12 * m.vartheta[k].abs().max(1e-300));
            }
        }

        #[test]
        fn midpoint_refinement_leaves_integrals_unchanged(
            values in prop::collection::vec(0.2..3.0f64, 2..6)
        ) {
            let mut refined = Vec::with_capacity(2 * values.len() - 1);
            for w in values.windows(2) {
                refined.push(w[0]);
                refined.push(0.5 * (w[0] + w[1]));
            }
            refined.push(*values.last().unwrap());
            let coarse = spec(CoefFn::Grid(values), CoefFn::Constant(1.3), CoefFn::Constant(0.4));
            let fine = spec(CoefFn::Grid(refined), CoefFn::Constant(1.3), CoefFn::Constant(0.4));
            for sel in [Integrand::Sigma1Sq, Integrand::Sigma1Pow4, Integrand::Sigma1CubedSigma2Rho] {
                let a = coarse.integrate(sel, 0.0, 1.0).unwrap();
                let b = fine.integrate(sel, 0.0, 1.0).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
