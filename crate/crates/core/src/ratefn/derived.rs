//! Rates for realized correlation ϱ = z/√(xy) and realized beta β_ℓ = z/x_ℓ.
//!
//! LDP rates follow by contraction of I_ldp onto the level sets of the
//! statistic. MDP rates follow from the delta method: the statistic is
//! linearized at [V]₁ with gradient `a`, and the rate is the minimum of
//! ½⟨x, Σ₁⁻¹x⟩ over the hyperplane ⟨a, x⟩ = u, i.e. u²/(2⟨a, Σ₁a⟩).
//!
//! Only constant volatilities are supported; the correlation may vary in time.

use nalgebra::{Matrix4, Vector3, Vector4};

use super::conjugate::ldp_rate;
use super::mdp::MdpCovariance;
use crate::coefficients::{CoefFn, CoefficientSpec, Integrand};
use crate::error::{CovolError, Result};
use crate::estimators::Asset;

fn constant_volatilities(spec: &CoefficientSpec) -> Result<(f64, f64)> {
    match (spec.sigma1(), spec.sigma2()) {
        (CoefFn::Constant(s1), CoefFn::Constant(s2)) => Ok((*s1, *s2)),
        _ => Err(CovolError::Unsupported(
            "correlation and beta rates are only available for constant volatilities".into(),
        )),
    }
}

fn constant_rho(spec: &CoefficientSpec) -> Option<f64> {
    match spec.rho() {
        CoefFn::Constant(r) => Some(*r),
        CoefFn::Grid(_) => None,
    }
}

/// ∫₀¹ρ_t dt, the correlation of [V]₁ when σ is constant.
fn mean_rho(spec: &CoefficientSpec) -> f64 {
    spec.integrate_with(0.0, 1.0, |_, _, rho| rho)
}

fn check_margin(spec: &CoefficientSpec) -> Result<()> {
    let max_rho = spec.max_abs_rho();
    if max_rho >= 1.0 - spec.rho_margin() {
        return Err(CovolError::domain(
            "rho",
            max_rho,
            "reaches the rho_margin boundary where the MDP covariance degenerates",
        ));
    }
    Ok(())
}

/// ln((1−ρu) / (√(1−ρ²)√(1−u²))); +∞ for |u| ≥ 1.
pub fn correlation_ldp_closed(u: f64, rho: f64) -> f64 {
    if !(u.abs() < 1.0) {
        return f64::INFINITY;
    }
    ((1.0 - rho * u) / ((1.0 - rho * rho).sqrt() * (1.0 - u * u).sqrt())).ln()
}

/// u² / (2(1−ρ²)²)
pub fn correlation_mdp_closed(u: f64, rho: f64) -> f64 {
    let a = 1.0 - rho * rho;
    u * u / (2.0 * a * a)
}

/// ½ ln(1 + (σ_ℓu − ρσ_ι)² / (σ_ι²(1−ρ²)))
pub fn beta_ldp_closed(u: f64, asset: Asset, sigma1: f64, sigma2: f64, rho: f64) -> f64 {
    let (sl, si) = asset.own_other(sigma1, sigma2);
    let d = sl * u - rho * si;
    0.5 * (d * d / (si * si * (1.0 - rho * rho))).ln_1p()
}

/// σ_ℓ²u² / (2σ_ι²(1−ρ²))
pub fn beta_mdp_closed(u: f64, asset: Asset, sigma1: f64, sigma2: f64, rho: f64) -> f64 {
    let (sl, si) = asset.own_other(sigma1, sigma2);
    sl * sl * u * u / (2.0 * si * si * (1.0 - rho * rho))
}

/// Gradient of z/√(xy) at (σ₁², σ₂², ϱσ₁σ₂).
pub fn correlation_gradient(sigma1: f64, sigma2: f64, varrho: f64) -> [f64; 3] {
    [
        -varrho / (2.0 * sigma1 * sigma1),
        -varrho / (2.0 * sigma2 * sigma2),
        1.0 / (sigma1 * sigma2),
    ]
}

/// Gradient of z/x_ℓ at (σ₁², σ₂², ϱσ₁σ₂).
pub fn beta_gradient(asset: Asset, sigma1: f64, sigma2: f64, varrho: f64) -> [f64; 3] {
    let (sl, si) = asset.own_other(sigma1, sigma2);
    let mut a = [0.0, 0.0, 1.0 / (sl * sl)];
    a[asset.index()] = -varrho * si / sl.powi(3);
    a
}

/// min ½⟨x, Σ⁻¹x⟩ subject to ⟨a, x⟩ = u, which equals u²/(2⟨a, Σa⟩).
pub fn affine_constrained_quadratic_min(sigma: &nalgebra::Matrix3<f64>, a: [f64; 3], u: f64) -> Result<f64> {
    let a = Vector3::from(a);
    let s = a.dot(&(sigma * a));
    if !(s > 0.0) {
        return Err(CovolError::Numerical(format!(
            "constraint direction has non-positive variance {s:e}"
        )));
    }
    Ok(u * u / (2.0 * s))
}

/// The same minimum by solving the KKT system [[Σ⁻¹, a], [aᵀ, 0]]·(x, μ) = (0, u).
pub fn affine_constrained_kkt(sigma: &nalgebra::Matrix3<f64>, a: [f64; 3], u: f64) -> Result<f64> {
    let prec = sigma
        .try_inverse()
        .ok_or(CovolError::Singular { condition: f64::INFINITY })?;
    let mut kkt = Matrix4::zeros();
    kkt.fixed_view_mut::<3, 3>(0, 0).copy_from(&prec);
    for i in 0..3 {
        kkt[(i, 3)] = a[i];
        kkt[(3, i)] = a[i];
    }
    let sol = kkt
        .lu()
        .solve(&Vector4::new(0.0, 0.0, 0.0, u))
        .ok_or(CovolError::Singular { condition: f64::INFINITY })?;
    let x = sol.fixed_rows::<3>(0).into_owned();
    Ok(0.5 * x.dot(&(prec * x)))
}

/// Correlation of [V]₁ for a constant-σ spec.
fn truth_correlation(spec: &CoefficientSpec, s1: f64, s2: f64) -> f64 {
    spec.integrate(Integrand::Covariation, 0.0, 1.0)
        .expect("[0, 1] is always a valid interval")
        / (s1 * s2)
}

pub fn correlation_mdp_rate(u: f64, spec: &CoefficientSpec) -> Result<f64> {
    let (s1, s2) = constant_volatilities(spec)?;
    check_margin(spec)?;
    if let Some(rho) = constant_rho(spec) {
        return Ok(correlation_mdp_closed(u, rho));
    }
    let a = correlation_gradient(s1, s2, truth_correlation(spec, s1, s2));
    affine_constrained_quadratic_min(MdpCovariance::new(spec).sigma1(), a, u)
}

pub fn beta_mdp_rate(u: f64, asset: Asset, spec: &CoefficientSpec) -> Result<f64> {
    let (s1, s2) = constant_volatilities(spec)?;
    check_margin(spec)?;
    if let Some(rho) = constant_rho(spec) {
        return Ok(beta_mdp_closed(u, asset, s1, s2, rho));
    }
    let a = beta_gradient(asset, s1, s2, truth_correlation(spec, s1, s2));
    affine_constrained_quadratic_min(MdpCovariance::new(spec).sigma1(), a, u)
}

pub fn correlation_ldp_rate(u: f64, spec: &CoefficientSpec) -> Result<f64> {
    let (_, _) = constant_volatilities(spec)?;
    if !(u.abs() < 1.0) {
        return Ok(f64::INFINITY);
    }
    match constant_rho(spec) {
        Some(rho) => Ok(correlation_ldp_closed(u, rho)),
        None => correlation_ldp_rate_manifold(u, spec),
    }
}

pub fn beta_ldp_rate(u: f64, asset: Asset, spec: &CoefficientSpec) -> Result<f64> {
    let (s1, s2) = constant_volatilities(spec)?;
    match constant_rho(spec) {
        Some(rho) => Ok(beta_ldp_closed(u, asset, s1, s2, rho)),
        None => beta_ldp_rate_manifold(u, asset, spec),
    }
}

/// inf { I_ldp(x, y, u√(xy)) : x, y > 0 } by quasi-Newton descent in (ln x, ln y).
pub fn correlation_ldp_rate_manifold(u: f64, spec: &CoefficientSpec) -> Result<f64> {
    let (s1, s2) = constant_volatilities(spec)?;
    if !(u.abs() < 1.0) {
        return Ok(f64::INFINITY);
    }
    let rho = mean_rho(spec);
    let shrink = (1.0 - rho * rho) / (1.0 - rho * u);
    let start = [(s1 * s1 * shrink).ln(), (s2 * s2 * shrink).ln()];
    minimize_on_chart(spec, start, |p| {
        let (x, y) = (p[0].exp(), p[1].exp());
        let z = u * (x * y).sqrt();
        // ∂(x,y,z)/∂p as columns
        ([x, y, z], [[x, 0.0, 0.5 * z], [0.0, y, 0.5 * z]])
    })
}

/// inf { I_ldp(x) : x₃ = u·x_ℓ } in coordinates x_ℓ = e^{p₀}, x_ι = u²x_ℓ + e^{p₁}.
pub fn beta_ldp_rate_manifold(u: f64, asset: Asset, spec: &CoefficientSpec) -> Result<f64> {
    let (s1, s2) = constant_volatilities(spec)?;
    let (sl, si) = asset.own_other(s1, s2);
    let rho = mean_rho(spec);
    let start = [(sl * sl).ln(), (si * si * (1.0 - rho * rho)).ln()];
    let own = asset.index();
    minimize_on_chart(spec, start, |p| {
        let xl = p[0].exp();
        let gap = p[1].exp();
        let xi = u * u * xl + gap;
        let mut x = [0.0, 0.0, u * xl];
        x[own] = xl;
        x[1 - own] = xi;
        let mut d0 = [0.0, 0.0, u * xl];
        d0[own] = xl;
        d0[1 - own] = u * u * xl;
        let mut d1 = [0.0; 3];
        d1[1 - own] = gap;
        (x, [d0, d1])
    })
}

const CHART_MAX_ITER: usize = 200;
const CHART_TOL: f64 = 1e-10;

type Chart<'a> = dyn Fn(&[f64; 2]) -> ([f64; 3], [[f64; 3]; 2]) + 'a;

/// BFGS on F(p) = I_ldp(x(p)); ∇ₓI_ldp is the maximizing tilt λ*.
fn minimize_on_chart<F>(spec: &CoefficientSpec, start: [f64; 2], chart: F) -> Result<f64>
where
    F: Fn(&[f64; 2]) -> ([f64; 3], [[f64; 3]; 2]),
{
    let chart: &Chart = &chart;
    let eval = |p: &[f64; 2]| -> Result<(f64, [f64; 2])> {
        let (x, jac) = chart(p);
        let r = ldp_rate(x, spec)?;
        match r.argmax {
            Some(l) if r.value.is_finite() => {
                let g = [0, 1].map(|k| (0..3).map(|i| l[i] * jac[k][i]).sum());
                Ok((r.value, g))
            }
            _ => Ok((f64::INFINITY, [0.0; 2])),
        }
    };
    let mut p = start;
    let (mut f, mut g) = eval(&p)?;
    if !f.is_finite() {
        return Err(CovolError::Numerical("manifold search started outside the rate domain".into()));
    }
    let mut h = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..CHART_MAX_ITER {
        let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if gnorm < CHART_TOL {
            return Ok(f);
        }
        let mut d = [
            -(h[0][0] * g[0] + h[0][1] * g[1]),
            -(h[1][0] * g[0] + h[1][1] * g[1]),
        ];
        let mut slope = d[0] * g[0] + d[1] * g[1];
        if slope >= 0.0 {
            h = [[1.0, 0.0], [0.0, 1.0]];
            d = [-g[0], -g[1]];
            slope = -gnorm * gnorm;
        }
        let mut step = 1.0;
        let accepted = loop {
            let trial = [p[0] + step * d[0], p[1] + step * d[1]];
            let (ft, gt) = eval(&trial)?;
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                break Some((trial, ft, gt));
            }
            step *= 0.5;
            if step < 1e-12 {
                break None;
            }
        };
        let Some((trial, ft, gt)) = accepted else {
            // No further decrease representable in floating point.
            return Ok(f);
        };
        let s = [trial[0] - p[0], trial[1] - p[1]];
        let y = [gt[0] - g[0], gt[1] - g[1]];
        let sy = s[0] * y[0] + s[1] * y[1];
        if sy > 1e-300 {
            let hy = [h[0][0] * y[0] + h[0][1] * y[1], h[1][0] * y[0] + h[1][1] * y[1]];
            let yhy = y[0] * hy[0] + y[1] * hy[1];
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        p = trial;
        f = ft;
        g = gt;
    }
    let grad_norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
    if grad_norm < 1e-6 * (1.0 + f) {
        return Ok(f);
    }
    Err(CovolError::NonConvergence {
        iterations: CHART_MAX_ITER,
        grad_norm,
        last_step: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Drift, DEFAULT_RHO_MARGIN};
    use crate::ratefn::conjugate::ldp_rate_constant;
    use rand::{Rng, SeedableRng};

    fn constant(s1: f64, s2: f64, rho: f64) -> CoefficientSpec {
        CoefficientSpec::constant(s1, s2, rho).unwrap()
    }

    fn varying_rho() -> CoefficientSpec {
        CoefficientSpec::new(
            CoefFn::Constant(1.3),
            CoefFn::Constant(0.8),
            CoefFn::Grid(vec![0.1, 0.7, 0.4]),
            Drift::None,
            DEFAULT_RHO_MARGIN,
        )
        .unwrap()
    }

    #[test]
    fn correlation_ldp_examples() {
        let spec = constant(1.0, 1.0, 0.0);
        assert!((correlation_ldp_rate(0.5, &spec).unwrap() + 0.5 * 0.75f64.ln()).abs() < 1e-15);
        assert_eq!(correlation_ldp_rate(1.0, &spec).unwrap(), f64::INFINITY);
        assert_eq!(correlation_ldp_rate(-1.0, &spec).unwrap(), f64::INFINITY);
        assert!(correlation_ldp_rate(0.3, &constant(2.0, 0.5, 0.3)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn correlation_ldp_minimizer_location() {
        let (s1, s2, rho, u) = (1.4, 0.6, 0.5, -0.2);
        let k = (1.0 - rho * rho) / (1.0 - rho * u);
        let (x, y) = (s1 * s1 * k, s2 * s2 * k);
        let at = ldp_rate_constant([x, y, u * (x * y).sqrt()], s1, s2, rho).unwrap();
        assert!((at - correlation_ldp_closed(u, rho)).abs() < 1e-12);
        // Neighbouring points on the manifold are not lower.
        for (dx, dy) in [(1.01, 1.0), (1.0, 0.99), (0.99, 1.01)] {
            let (x2, y2) = (x * dx, y * dy);
            let v = ldp_rate_constant([x2, y2, u * (x2 * y2).sqrt()], s1, s2, rho).unwrap();
            assert!(v >= at);
        }
    }

    #[test]
    fn manifold_search_matches_closed_forms() {
        let spec = constant(1.2, 0.7, -0.4);
        for u in [-0.8, -0.3, 0.2, 0.6] {
            let closed = correlation_ldp_closed(u, -0.4);
            let num = correlation_ldp_rate_manifold(u, &spec).unwrap();
            assert!((closed - num).abs() < 1e-8, "u = {u}: {closed} vs {num}");
        }
        for asset in [Asset::First, Asset::Second] {
            for u in [-1.5, 0.1, 0.9] {
                let closed = beta_ldp_closed(u, asset, 1.2, 0.7, -0.4);
                let num = beta_ldp_rate_manifold(u, asset, &spec).unwrap();
                assert!((closed - num).abs() < 1e-8, "{asset:?} u = {u}: {closed} vs {num}");
            }
        }
    }

    #[test]
    fn beta_examples() {
        let spec = constant(1.0, 1.0, 0.0);
        assert!((beta_ldp_rate(1.0, Asset::First, &spec).unwrap() - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(beta_ldp_rate(0.25, Asset::First, &constant(2.0, 1.0, 0.5)).unwrap(), 0.0);
        assert_eq!(beta_mdp_rate(0.0, Asset::Second, &spec).unwrap(), 0.0);
        assert!((beta_mdp_rate(0.2, Asset::First, &spec).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn mdp_closed_forms_equal_constrained_minimum() {
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(3);
        for _ in 0..100 {
            let s1 = rng.random_range(0.3..3.0);
            let s2 = rng.random_range(0.3..3.0);
            let rho = rng.random_range(-0.95..0.95);
            let u = rng.random_range(-0.5..0.5);
            let sigma = *MdpCovariance::new(&constant(s1, s2, rho)).sigma1();
            let a = correlation_gradient(s1, s2, rho);
            let kkt = affine_constrained_kkt(&sigma, a, u).unwrap();
            let closed = correlation_mdp_closed(u, rho);
            assert!((kkt - closed).abs() < 1e-10 * (1.0 + closed));
            for asset in [Asset::First, Asset::Second] {
                let a = beta_gradient(asset, s1, s2, rho);
                let kkt = affine_constrained_kkt(&sigma, a, u).unwrap();
                let closed = beta_mdp_closed(u, asset, s1, s2, rho);
                assert!((kkt - closed).abs() < 1e-10 * (1.0 + closed));
            }
        }
    }

    #[test]
    fn correlation_mdp_example() {
        let v = correlation_mdp_rate(0.1, &constant(1.0, 1.0, 0.5)).unwrap();
        assert!((v - 0.01 / (2.0 * 0.5625)).abs() < 1e-15);
        assert_eq!(correlation_mdp_rate(0.0, &constant(1.0, 1.0, 0.5)).unwrap(), 0.0);
        assert!(correlation_mdp_rate(0.1, &constant(1.0, 1.0, 1.0 - DEFAULT_RHO_MARGIN)).is_err());
    }

    #[test]
    fn time_varying_volatility_is_unsupported() {
        let spec = CoefficientSpec::new(
            CoefFn::Grid(vec![1.0, 2.0]),
            CoefFn::Constant(1.0),
            CoefFn::Constant(0.2),
            Drift::None,
            DEFAULT_RHO_MARGIN,
        )
        .unwrap();
        assert!(matches!(correlation_ldp_rate(0.1, &spec), Err(CovolError::Unsupported(_))));
        assert!(matches!(beta_mdp_rate(0.1, Asset::First, &spec), Err(CovolError::Unsupported(_))));
    }

    #[test]
    fn time_varying_correlation_rates() {
        let spec = varying_rho();
        let varrho = mean_rho(&spec);
        // Zero at the limit statistic.
        assert!(correlation_ldp_rate(varrho, &spec).unwrap() < 1e-10);
        assert!(beta_ldp_rate(varrho * 0.8 / 1.3, Asset::First, &spec).unwrap() < 1e-10);
        // Small deviations: LDP rate ≈ MDP quadratic.
        let h = 1e-3;
        let ldp = correlation_ldp_rate(varrho + h, &spec).unwrap();
        let mdp = correlation_mdp_rate(h, &spec).unwrap();
        assert!((ldp / mdp - 1.0).abs() < 0.01, "{ldp} vs {mdp}");
        let ldp = beta_ldp_rate(varrho * 1.3 / 0.8 + h, Asset::Second, &spec).unwrap();
        let mdp = beta_mdp_rate(h, Asset::Second, &spec).unwrap();
        assert!((ldp / mdp - 1.0).abs() < 0.01, "{ldp} vs {mdp}");
    }
}
