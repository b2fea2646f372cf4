//! The acceptance battery: ten numbered checks that tie the implementation to
//! closed forms, exact laws and Monte Carlo.

use std::str::FromStr;
use std::time::Instant;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::coefficients::{CoefficientSpec, Drift};
use crate::error::{CovolError, Result};
use crate::estimators::{integrated_truth, tilde_vector, Asset};
use crate::montecarlo::special::{log_chi_square_oracle, Direction};
use crate::montecarlo::tail::{
    estimate_tail_naive, estimate_tail_tilted, half_space_dominating_point, Event, Scale, Statistic, TailQuery,
};
use crate::montecarlo::{block_ranges, covariance_check};
use crate::ratefn::conjugate::{ldp_rate, pointwise_conjugate};
use crate::ratefn::derived::{
    affine_constrained_kkt, beta_gradient, beta_mdp_closed, beta_mdp_rate, correlation_gradient,
    correlation_ldp_closed, correlation_ldp_rate_manifold, correlation_mdp_closed, correlation_mdp_rate,
};
use crate::ratefn::mdp::{kernel_determinant, kernel_inverse, kernel_matrix, mdp_rate, MdpCovariance, MdpScale};
use crate::ratefn::pointwise::{cgf_gradient, cgf_hessian_at_zero, cgf_pointwise, in_domain, legendre_pointwise, TiltPoint};
use crate::simulate::{derive_seed, PathSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// Reduced sample sizes; the whole battery runs in well under a minute.
    Quick,
    /// The sample sizes and runtime budgets of the acceptance criteria.
    Full,
}

impl FromStr for Level {
    type Err = CovolError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(CovolError::Contract(format!("unknown verify level {other:?} (quick|full)"))),
        }
    }
}

impl Level {
    fn pick<T>(self, quick: T, full: T) -> T {
        match self {
            Level::Quick => quick,
            Level::Full => full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    pub metrics: serde_json::Value,
    pub seconds: f64,
    /// Runtime limit, enforced at the full level only.
    pub budget_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub level: Level,
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}

pub const CRITERIA: [(u8, &str, Option<f64>); 10] = [
    (1, "closed_form_conjugacy", Some(10.0)),
    (2, "mgf_correctness", Some(60.0)),
    (3, "gradient_hessian_anchors", None),
    (4, "sigma_consistency", None),
    (5, "clt_mdp_variance", Some(300.0)),
    (6, "scalar_ldp_exact_law", None),
    (7, "tilted_rare_event", Some(300.0)),
    (8, "derived_statistic_rates", None),
    (9, "mdp_empirical_correlation", Some(900.0)),
    (10, "drift_robustness", None),
];

/// Default root seed of the battery.
pub const DEFAULT_SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    summary: String,
    metrics: serde_json::Value,
}

pub fn run_criterion(id: u8, level: Level, seed: u64) -> Result<CriterionReport> {
    let &(_, name, budget) = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .ok_or_else(|| CovolError::Contract(format!("no acceptance criterion {id}")))?;
    let seed = derive_seed(seed, id as u64);
    let start = Instant::now();
    let outcome = match id {
        1 => closed_form_conjugacy(level, seed),
        2 => mgf_correctness(level, seed),
        3 => gradient_hessian_anchors(),
        4 => sigma_consistency(seed),
        5 => clt_mdp_variance(level, seed),
        6 => scalar_ldp_exact_law(),
        7 => tilted_rare_event(level, seed),
        8 => derived_statistic_rates(seed),
        9 => mdp_empirical_correlation(level, seed),
        10 => drift_robustness(level, seed),
        _ => unreachable!(),
    };
    let seconds = start.elapsed().as_secs_f64();
    let outcome = outcome.unwrap_or_else(|e| Outcome {
        passed: false,
        summary: format!("error: {e}"),
        metrics: json!(null),
    });
    let over_budget = level == Level::Full && budget.is_some_and(|b| seconds > b);
    let summary = if over_budget {
        format!("{} (runtime {seconds:.1} s exceeds {:.0} s)", outcome.summary, budget.unwrap())
    } else {
        outcome.summary
    };
    Ok(CriterionReport {
        id,
        name,
        passed: outcome.passed && !over_budget,
        summary,
        metrics: outcome.metrics,
        seconds,
        budget_seconds: budget,
    })
}

pub fn run_all(level: Level, seed: u64) -> VerifyReport {
    let criteria: Vec<CriterionReport> = CRITERIA
        .iter()
        .map(|c| run_criterion(c.0, level, seed).expect("criterion ids are valid"))
        .collect();
    VerifyReport {
        level,
        seed,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    }
}

fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Random x with x₁, x₂ > 0 and |x₃| < √(x₁x₂).
fn random_effective_point(r: &mut Xoshiro256PlusPlus) -> [f64; 3] {
    let x1 = r.random_range(0.1..4.0);
    let x2 = r.random_range(0.1..4.0);
    let t: f64 = r.random_range(-0.95..0.95);
    [x1, x2, t * (x1 * x2).sqrt()]
}

fn closed_form_conjugacy(level: Level, seed: u64) -> Result<Outcome> {
    let per_c = level.pick(200, 1000);
    let cs = [0.0, 0.5, -0.5, 0.9, -0.9];
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut unattained = 0;
    for &c in &cs {
        for _ in 0..per_c {
            let x = random_effective_point(&mut r);
            let numeric = pointwise_conjugate(x, c)?;
            let closed = legendre_pointwise(x, c)?;
            if !numeric.attained {
                unattained += 1;
            }
            worst = worst.max((numeric.value - closed).abs());
        }
    }
    Ok(Outcome {
        passed: worst < 1e-5 && unattained == 0,
        summary: format!(
            "max |Newton conjugate − closed form| = {worst:.2e} over {} points (tol 1e-5)",
            per_c * cs.len()
        ),
        metrics: json!({ "max_abs_error": worst, "points": per_c * cs.len(), "unattained": unattained }),
    })
}

/// Monte Carlo E exp(λ₁ξ² + λ₂ξ′² + λ₃ξξ′) for unit-variance ξ, ξ′ with correlation c.
fn mc_mgf(lambda: [f64; 3], c: f64, draws: usize, seed: u64) -> (f64, f64) {
    let s = (1.0 - c * c).sqrt();
    let sums: Vec<(f64, f64)> = block_ranges(draws)
        .into_par_iter()
        .map(|(start, end)| {
            let mut r = rng(derive_seed(seed, start as u64));
            let (mut sw, mut sw2) = (0.0, 0.0);
            for _ in start..end {
                let z1: f64 = StandardNormal.sample(&mut r);
                let z2: f64 = StandardNormal.sample(&mut r);
                let (a, b) = (z1, c * z1 + s * z2);
                let w = (lambda[0] * a * a + lambda[1] * b * b + lambda[2] * a * b).exp();
                sw += w;
                sw2 += w * w;
            }
            (sw, sw2)
        })
        .collect();
    let (sw, sw2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = draws as f64;
    let mean = sw / n;
    let var = (sw2 / n - mean * mean) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn mgf_correctness(level: Level, seed: u64) -> Result<Outcome> {
    let draws = level.pick(200_000, 10_000_000);
    let mut r = rng(seed);
    let mut rows = Vec::new();
    let mut worst_z = 0.0f64;
    for i in 0..20 {
        let c = -0.9 + 1.8 * i as f64 / 19.0;
        // Tilts with a finite second moment of the weight: 2.2λ must stay in D_c.
        let lambda = loop {
            let l = [0, 1, 2].map(|_| r.random_range(-0.15..0.15));
            if in_domain(TiltPoint(l.map(|v| 2.2 * v)), c)? {
                break l;
            }
        };
        let exact = cgf_pointwise(TiltPoint(lambda), c)?.exp();
        let (mean, se) = mc_mgf(lambda, c, draws, derive_seed(seed, i));
        let z = (mean - exact).abs() / se;
        worst_z = worst_z.max(z);
        rows.push(json!({ "c": c, "lambda": lambda, "exact": exact, "mc": mean, "std_err": se, "z": z }));
    }
    Ok(Outcome {
        passed: worst_z < 3.0,
        summary: format!("max |MC − exp P_c| = {worst_z:.2} standard errors over 20 tilts, {draws} draws each (tol 3)"),
        metrics: json!({ "draws": draws, "tilts": rows }),
    })
}

fn gradient_hessian_anchors() -> Result<Outcome> {
    let mut worst_g = 0.0f64;
    let mut worst_h = 0.0f64;
    let mut worst_analytic = 0.0f64;
    for i in 0..20 {
        let c = -0.95 + 1.9 * i as f64 / 19.0;
        let f = |l: [f64; 3]| cgf_pointwise(TiltPoint(l), c).unwrap();
        let e = |k: usize, h: f64| {
            let mut v = [0.0; 3];
            v[k] = h;
            v
        };
        let add = |a: [f64; 3], b: [f64; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
        let g = 1e-6;
        let want = [1.0, 1.0, c];
        let analytic = cgf_gradient(TiltPoint([0.0; 3]), c)?;
        for k in 0..3 {
            let fd = (f(e(k, g)) - f(e(k, -g))) / (2.0 * g);
            worst_g = worst_g.max((fd - want[k]).abs());
            worst_analytic = worst_analytic.max((analytic[k] - want[k]).abs());
        }
        let h = 1e-4;
        let explicit = Matrix3::new(
            2.0, 2.0 * c * c, 2.0 * c,
            2.0 * c * c, 2.0, 2.0 * c,
            2.0 * c, 2.0 * c, 1.0 + c * c,
        );
        let lib = cgf_hessian_at_zero(c)?;
        worst_analytic = worst_analytic.max((lib - explicit).abs().max());
        for a in 0..3 {
            for b in 0..3 {
                let fd = (f(add(e(a, h), e(b, h))) - f(add(e(a, h), e(b, -h))) - f(add(e(a, -h), e(b, h)))
                    + f(add(e(a, -h), e(b, -h))))
                    / (4.0 * h * h);
                worst_h = worst_h.max((fd - explicit[(a, b)]).abs());
            }
        }
    }
    Ok(Outcome {
        passed: worst_g < 1e-6 && worst_h < 1e-5 && worst_analytic < 1e-14,
        summary: format!(
            "finite differences vs (1,1,c): {worst_g:.1e} (tol 1e-6); vs Hessian matrix: {worst_h:.1e} (tol 1e-5); 20 values of c"
        ),
        metrics: json!({ "gradient_fd_error": worst_g, "hessian_fd_error": worst_h, "analytic_error": worst_analytic }),
    })
}

fn sigma_consistency(seed: u64) -> Result<Outcome> {
    let mut r = rng(seed);
    let (mut worst_inv, mut worst_prod, mut worst_det, mut worst_scaled) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let s1 = r.random_range(0.3..3.0);
        let s2 = r.random_range(0.3..3.0);
        let rho = r.random_range(-0.95..0.95);
        let k = kernel_matrix(s1, s2, rho);
        let closed = kernel_inverse(s1, s2, rho);
        let dense = k.try_inverse().ok_or(CovolError::Singular { condition: f64::INFINITY })?;
        worst_inv = worst_inv.max((closed - dense).abs().max() / dense.abs().max());
        worst_prod = worst_prod.max((k * closed - Matrix3::identity()).abs().max());
        worst_det = worst_det.max((k.determinant() / kernel_determinant(s1, s2, rho) - 1.0).abs());
        // The covariance Σ_t = 2K_t carries the same closed-form inverse.
        let m = MdpCovariance::new(&CoefficientSpec::constant(s1, s2, rho)?);
        let prod = m.sigma_t(0.5)? * m.sigma_t_inv(0.5)?;
        worst_scaled = worst_scaled.max((prod - Matrix3::identity()).abs().max());
    }
    Ok(Outcome {
        passed: worst_inv < 1e-9 && worst_prod < 1e-9 && worst_det < 1e-9 && worst_scaled < 1e-9,
        summary: format!(
            "closed-form inverse vs LU: {worst_inv:.1e}; K·K⁻¹ − I: {worst_prod:.1e}; det vs ½σ₁⁶σ₂⁶(1−ρ²)³: {worst_det:.1e} (tol 1e-9, 100 specs)"
        ),
        metrics: json!({
            "inverse_relative_error": worst_inv,
            "product_error": worst_prod,
            "determinant_relative_error": worst_det,
            "covariance_product_error": worst_scaled,
        }),
    })
}

fn clt_mdp_variance(level: Level, seed: u64) -> Result<Outcome> {
    let paths = level.pick(20_000, 100_000);
    let spec = CoefficientSpec::constant(1.0, 1.0, 0.5)?;
    let check = covariance_check(&spec, 1000, paths, seed)?;
    let worst = check.max_relative_error();
    let mut worst_z = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            worst_z = worst_z.max((check.sample[i][j] - check.sigma1[i][j]).abs() / check.std_err[i][j]);
        }
    }
    Ok(Outcome {
        passed: worst < 0.05,
        summary: format!(
            "max relative error of sample covariance vs Σ₁ = {worst:.3} (tol 0.05), largest deviation {worst_z:.2} standard errors, {paths} paths at n = 1000"
        ),
        metrics: serde_json::to_value(&check).map_err(|e| CovolError::Internal(e.to_string()))?,
    })
}

fn scalar_ldp_exact_law() -> Result<Outcome> {
    let target = 0.5 * (1.5 - 1.0 - 1.5f64.ln());
    let mut rates = Vec::new();
    for n in [500usize, 2000, 8000] {
        rates.push(-log_chi_square_oracle(1.5, n, 1.0, Direction::Geq)? / n as f64);
    }
    let gaps: Vec<f64> = rates.iter().map(|r| r - target).collect();
    let monotone = gaps.windows(2).all(|w| w[1].abs() < w[0].abs())
        && rates.windows(2).all(|w| w[1] < w[0]);
    let final_gap = gaps[2].abs();
    let spec = CoefficientSpec::constant(1.0, 1.0, 0.0)?;
    let dominating = half_space_dominating_point(&spec, 0, Direction::Geq, 1.5)?;
    let at_point = ldp_rate(dominating.point, &spec)?.value;
    let lib_err = (dominating.rate - target).abs().max((at_point - target).abs());
    Ok(Outcome {
        passed: monotone && final_gap < 5e-3 && lib_err < 1e-6,
        summary: format!(
            "−(1/n) log P(Q₁ⁿ ≥ 1.5) = {:.6}, {:.6}, {:.6} → {target:.6}; final gap {final_gap:.1e} (tol 5e-3); library infimum error {lib_err:.1e} (tol 1e-6)",
            rates[0], rates[1], rates[2]
        ),
        metrics: json!({
            "n": [500, 2000, 8000],
            "exact_rates": rates,
            "target": target,
            "monotone": monotone,
            "library_infimum": dominating.rate,
            "ldp_rate_at_dominating_point": at_point,
            "dominating_point": dominating.point,
        }),
    })
}

fn tilted_rare_event(level: Level, seed: u64) -> Result<Outcome> {
    let paths = level.pick(10_000, 100_000);
    let spec = CoefficientSpec::constant(1.0, 1.0, 0.5)?;
    let query = TailQuery {
        event: Event::Threshold {
            statistic: Statistic::C,
            direction: Direction::Geq,
            threshold: 0.7,
        },
        n: 200,
        paths,
        seed,
        scale: Scale::Ldp,
    };
    let est = estimate_tail_tilted(&query, &spec)?;
    let rel = (est.empirical_rate / est.predicted_rate - 1.0).abs();
    let ess_ok = est.effective_sample_size >= 1000.0;
    Ok(Outcome {
        passed: rel <= 0.10 && ess_ok,
        summary: format!(
            "empirical rate {:.5} vs inf I_ldp {:.5}: relative gap {rel:.3} (tol 0.10); ESS {:.0} (min 1000); p̂ = {:.3e} ± {:.1e}",
            est.empirical_rate, est.predicted_rate, est.effective_sample_size, est.p_hat, est.std_err
        ),
        metrics: serde_json::to_value(&est).map_err(|e| CovolError::Internal(e.to_string()))?,
    })
}

fn derived_statistic_rates(seed: u64) -> Result<Outcome> {
    let mut r = rng(seed);
    let mut worst_mdp = 0.0f64;
    for _ in 0..100 {
        let s1 = r.random_range(0.3..3.0);
        let s2 = r.random_range(0.3..3.0);
        let rho = r.random_range(-0.95..0.95);
        let u = r.random_range(-0.5..0.5);
        let spec = CoefficientSpec::constant(s1, s2, rho)?;
        let sigma = *MdpCovariance::new(&spec).sigma1();
        let corr = affine_constrained_kkt(&sigma, correlation_gradient(s1, s2, rho), u)?;
        worst_mdp = worst_mdp.max((corr - correlation_mdp_closed(u, rho)).abs());
        worst_mdp = worst_mdp.max((correlation_mdp_rate(u, &spec)? - corr).abs());
        for asset in [Asset::First, Asset::Second] {
            let kkt = affine_constrained_kkt(&sigma, beta_gradient(asset, s1, s2, rho), u)?;
            worst_mdp = worst_mdp.max((kkt - beta_mdp_closed(u, asset, s1, s2, rho)).abs());
            worst_mdp = worst_mdp.max((beta_mdp_rate(u, asset, &spec)? - kkt).abs());
        }
    }
    let mut worst_ldp = 0.0f64;
    for _ in 0..20 {
        let s1 = r.random_range(0.5..2.0);
        let s2 = r.random_range(0.5..2.0);
        let rho = r.random_range(-0.8..0.8);
        let u = r.random_range(-0.9..0.9);
        let spec = CoefficientSpec::constant(s1, s2, rho)?;
        let manifold = correlation_ldp_rate_manifold(u, &spec)?;
        worst_ldp = worst_ldp.max((manifold - correlation_ldp_closed(u, rho)).abs());
    }
    Ok(Outcome {
        passed: worst_mdp < 1e-10 && worst_ldp < 1e-5,
        summary: format!(
            "MDP closed forms vs constrained quadratic minimum: {worst_mdp:.1e} (tol 1e-10, 100 tuples); correlation LDP closed form vs manifold minimum: {worst_ldp:.1e} (tol 1e-5, 20 tuples)"
        ),
        metrics: json!({ "mdp_max_abs_error": worst_mdp, "ldp_max_abs_error": worst_ldp }),
    })
}

fn mdp_empirical_correlation(level: Level, seed: u64) -> Result<Outcome> {
    let paths = level.pick(100_000, 1_000_000);
    let rho: f64 = 0.5;
    let n = 400;
    let spec = CoefficientSpec::constant(1.0, 1.0, rho)?;
    let gamma = MdpScale::new(0.25)?;
    let speed = gamma.speed(n);
    // exp(−b_n² I(r)) = 10⁻³ with I(r) = r²/(2(1−ρ²)²).
    let r = (1.0 - rho * rho) * (2.0 * 1000f64.ln() / speed).sqrt();
    let query = TailQuery {
        event: Event::Centered {
            statistic: Statistic::Correlation,
            radius: r,
        },
        n,
        paths,
        seed,
        scale: Scale::Mdp { gamma },
    };
    let est = estimate_tail_naive(&query, &spec)?;
    let rel = (est.empirical_rate / est.predicted_rate - 1.0).abs();
    let four_times = 2.0 * r * r / (1.0 - rho * rho).powi(2);
    Ok(Outcome {
        passed: rel <= 0.25,
        summary: format!(
            "r = {r:.4}: empirical rate {:.4} vs r²/(2(1−ρ²)²) = {:.4}, relative gap {rel:.3} (tol 0.25); p̂ = {:.2e} from {paths} paths; 2r²/(1−ρ²)² = {four_times:.4} would be off by {:.3}",
            est.empirical_rate,
            est.predicted_rate,
            est.p_hat,
            (est.empirical_rate / four_times - 1.0).abs()
        ),
        metrics: json!({
            "radius": r,
            "raw_deviation": r * gamma.b_n(n) / (n as f64).sqrt(),
            "estimate": est,
            "rate_factor_four_larger": four_times,
        }),
    })
}

fn drift_robustness(level: Level, seed: u64) -> Result<Outcome> {
    let paths = level.pick(200, 2000);
    let base = CoefficientSpec::constant(1.0, 1.0, 0.5)?;
    let spec = base.with_drift(Drift::LinearMeanReverting {
        kappa: [1.0, 1.0],
        theta: [0.0, 0.0],
    })?;
    let truth = integrated_truth(&spec, 1.0)?.as_array();
    let mut errors = Vec::new();
    for n in [100usize, 400, 1600] {
        let sampler = PathSampler::new(&spec, n)?.with_initial([1.0, -1.0]);
        let per_block: Vec<Result<f64>> = block_ranges(paths)
            .into_par_iter()
            .map(|(start, end)| {
                let mut total = 0.0;
                for i in start..end {
                    let p = sampler.sample(derive_seed(derive_seed(seed, n as u64), i as u64));
                    let v = tilde_vector(&p, &spec, 1.0)?.as_array();
                    total += (0..3).map(|k| (v[k] - truth[k]).abs()).sum::<f64>();
                }
                Ok(total)
            })
            .collect();
        let mut total = 0.0;
        for b in per_block {
            total += b?;
        }
        errors.push(total / paths as f64);
    }
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let probes = [[1.3, 0.8, 0.6], [0.7, 1.4, 0.1], [1.0, 1.0, 0.5]];
    let mut unchanged = true;
    for x in probes {
        unchanged &= ldp_rate(x, &spec)?.value == ldp_rate(x, &base)?.value;
        unchanged &= mdp_rate(x, &spec)? == mdp_rate(x, &base)?;
        unchanged &= correlation_mdp_rate(x[2] - 0.5, &spec)? == correlation_mdp_rate(x[2] - 0.5, &base)?;
    }
    Ok(Outcome {
        passed: decreasing && unchanged,
        summary: format!(
            "mean |Ṽ₁ⁿ − [V]₁|₁ = {:.4}, {:.4}, {:.4} at n = 100, 400, 1600 ({}); rates unchanged by drift: {unchanged}",
            errors[0],
            errors[1],
            errors[2],
            if decreasing { "strictly decreasing" } else { "not decreasing" }
        ),
        metrics: json!({ "n": [100, 400, 1600], "mean_abs_error": errors, "paths": paths, "rates_unchanged": unchanged }),
    })
}

/// Cheap sanity checks of a user-supplied spec, reported next to the battery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn spec_checks(spec: &CoefficientSpec) -> Vec<SpecCheck> {
    let mut out = Vec::new();
    match integrated_truth(spec, 1.0).and_then(|v| ldp_rate(v.as_array(), spec)) {
        Ok(r) => out.push(SpecCheck {
            name: "ldp_rate_zero_at_truth",
            passed: r.value.abs() < 1e-9,
            detail: format!("I_ldp([V]₁) = {:.3e}", r.value),
        }),
        Err(e) => out.push(SpecCheck {
            name: "ldp_rate_zero_at_truth",
            passed: false,
            detail: e.to_string(),
        }),
    }
    let m = MdpCovariance::new(spec);
    let cond = m.condition_number();
    out.push(SpecCheck {
        name: "sigma1_positive_definite",
        passed: m.sigma1().cholesky().is_some(),
        detail: format!("condition number {cond:.3e}"),
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_parsing() {
        assert_eq!("quick".parse::<Level>().unwrap(), Level::Quick);
        assert_eq!("full".parse::<Level>().unwrap(), Level::Full);
        assert!("fast".parse::<Level>().is_err());
        assert!(run_criterion(11, Level::Quick, 0).is_err());
    }

    #[test]
    fn analytic_criteria_pass() {
        for id in [3, 4, 6, 8] {
            let r = run_criterion(id, Level::Quick, DEFAULT_SEED).unwrap();
            assert!(r.passed, "criterion {id}: {}", r.summary);
        }
    }

    #[test]
    fn spec_checks_on_constant_spec() {
        let checks = spec_checks(&CoefficientSpec::constant(1.0, 2.0, 0.3).unwrap());
        assert!(checks.iter().all(|c| c.passed));
    }
}
