//! Tail probabilities of the realized statistics by plain and tilted sampling,
//! next to the rate predicted by the deviation principles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::special::Direction;
use super::block_ranges;
use crate::coefficients::CoefficientSpec;
use crate::error::{CovolError, Result};
use crate::estimators::{integrated_truth, realized_beta, realized_correlation, Asset, RealizedVector};
use crate::ratefn::conjugate::ldp_rate;
use crate::ratefn::derived::{beta_ldp_rate, beta_mdp_rate, correlation_ldp_rate, correlation_mdp_rate};
use crate::ratefn::integrated::{ConvexCgf, IntegratedCgf};
use crate::ratefn::mdp::{MdpCovariance, MdpScale};
use crate::simulate::{derive_seed, PathSampler, TiltedSampler};

/// Effective sample sizes below this are flagged.
pub const MIN_EFFECTIVE_SAMPLE_SIZE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Q1,
    Q2,
    C,
    Correlation,
    Beta1,
    Beta2,
}

impl Statistic {
    /// Component index for the coordinates of the realized vector.
    pub fn component(self) -> Option<usize> {
        match self {
            Statistic::Q1 => Some(0),
            Statistic::Q2 => Some(1),
            Statistic::C => Some(2),
            _ => None,
        }
    }

    pub fn evaluate(self, v: &RealizedVector) -> Result<f64> {
        match self {
            Statistic::Q1 => Ok(v.q1),
            Statistic::Q2 => Ok(v.q2),
            Statistic::C => Ok(v.c),
            Statistic::Correlation => realized_correlation(v),
            Statistic::Beta1 => realized_beta(v, Asset::First),
            Statistic::Beta2 => realized_beta(v, Asset::Second),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    /// statistic (≥ | ≤) threshold, in the scale's coordinates.
    Threshold {
        statistic: Statistic,
        direction: Direction,
        threshold: f64,
    },
    /// |statistic − truth| ≥ radius, in the scale's coordinates.
    Centered { statistic: Statistic, radius: f64 },
}

impl Event {
    pub fn statistic(&self) -> Statistic {
        match *self {
            Event::Threshold { statistic, .. } | Event::Centered { statistic, .. } => statistic,
        }
    }

    /// Whether the event holds for a statistic already centered (`z`) as the scale requires.
    fn holds(&self, z: f64) -> bool {
        match *self {
            Event::Threshold {
                direction,
                threshold,
                ..
            } => direction.holds(z, threshold),
            Event::Centered { radius, .. } => z.abs() >= radius,
        }
    }
}

/// Large deviations (speed n, raw statistic) or moderate deviations
/// (speed b_n², statistic (√n/b_n)(S − S_true)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Scale {
    Ldp,
    Mdp { gamma: MdpScale },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailQuery {
    pub event: Event,
    pub n: usize,
    pub paths: usize,
    pub seed: u64,
    pub scale: Scale,
}

impl TailQuery {
    fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(CovolError::domain("paths", 0.0, "at least one path is required"));
        }
        if self.n == 0 {
            return Err(CovolError::domain("n", 0.0, "at least one interval is required"));
        }
        let bound = match self.event {
            Event::Threshold { threshold, .. } => threshold,
            Event::Centered { radius, .. } => radius,
        };
        if !bound.is_finite() {
            return Err(CovolError::domain("threshold", bound, "must be finite"));
        }
        Ok(())
    }

    pub fn speed(&self) -> f64 {
        match self.scale {
            Scale::Ldp => self.n as f64,
            Scale::Mdp { gamma } => gamma.speed(self.n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub effective_sample_size: f64,
    /// −log(p_hat)/speed; +∞ when no path hit the event.
    pub empirical_rate: f64,
    pub predicted_rate: f64,
    pub speed: f64,
    pub hits: u64,
    pub paths: usize,
    /// Tilt used by the importance sampler, if any.
    pub tilt: Option<[f64; 3]>,
    pub flags: Vec<String>,
}

/// Dominating point of a half-space event on the realized vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominatingPoint {
    /// inf of I_ldp over the event.
    pub rate: f64,
    pub point: [f64; 3],
    pub tilt: [f64; 3],
}

/// Truth value S([V]₁) of a statistic.
fn truth_statistic(stat: Statistic, spec: &CoefficientSpec) -> Result<f64> {
    stat.evaluate(&integrated_truth(spec, 1.0)?)
}

/// inf { I_ldp(x) : x_j (≥|≤) θ } by the dual one-dimensional problem
/// sup over s of sθ − Λ(s·e_j), with s ≥ 0 for ≥ and s ≤ 0 for ≤.
pub fn half_space_dominating_point(
    spec: &CoefficientSpec,
    component: usize,
    direction: Direction,
    threshold: f64,
) -> Result<DominatingPoint> {
    let cgf = IntegratedCgf::new(spec);
    let sign = match direction {
        Direction::Geq => 1.0,
        Direction::Leq => -1.0,
    };
    let tilt_at = |s: f64| {
        let mut l = [0.0; 3];
        l[component] = sign * s;
        l
    };
    // Derivative of the dual objective along the ray, in the ray parameter s ≥ 0.
    let slope = |s: f64| -> Option<f64> {
        let (g, _) = cgf.derivatives(&tilt_at(s))?;
        Some(sign * (threshold - g[component]))
    };
    let truth = cgf.derivatives(&[0.0; 3]).map(|(g, _)| g).unwrap();
    let zero = |point: [f64; 3]| DominatingPoint {
        rate: 0.0,
        point,
        tilt: [0.0; 3],
    };
    if slope(0.0).unwrap() <= 0.0 {
        return Ok(zero(truth));
    }
    // Bracket the root of the slope, or run into the domain boundary.
    let mut lo = 0.0;
    let mut hi = 1e-3;
    loop {
        match slope(hi) {
            Some(d) if d > 0.0 => {
                lo = hi;
                hi *= 2.0;
                if hi > 1e12 {
                    return Err(CovolError::Numerical("dominating point search diverged".into()));
                }
            }
            Some(_) => break,
            None => {
                // Outside the domain: shrink towards the boundary.
                let mut inside = lo;
                let mut outside = hi;
                for _ in 0..200 {
                    let mid = 0.5 * (inside + outside);
                    match slope(mid) {
                        Some(d) if d > 0.0 => inside = mid,
                        Some(_) => {
                            hi = mid;
                            break;
                        }
                        None => outside = mid,
                    }
                    if outside - inside < 1e-15 * outside {
                        break;
                    }
                }
                if slope(hi).is_none_or(|d| d > 0.0) {
                    // Slope stays positive up to the boundary: the infimum is
                    // not attained by an interior tilt.
                    let s = inside;
                    let l = tilt_at(s);
                    let g = cgf.derivatives(&l).unwrap().0;
                    let rate = sign * s * threshold - cgf.value(&l);
                    let mut point = g;
                    point[component] = threshold;
                    return Ok(DominatingPoint { rate, point, tilt: l });
                }
                lo = inside;
                break;
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match slope(mid) {
            Some(d) if d > 0.0 => lo = mid,
            _ => hi = mid,
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    let l = tilt_at(s);
    let (g, _) = cgf
        .derivatives(&l)
        .ok_or_else(|| CovolError::Internal("dominating tilt left the domain".into()))?;
    Ok(DominatingPoint {
        rate: sign * s * threshold - cgf.value(&l),
        point: g,
        tilt: l,
    })
}

fn derived_rate(stat: Statistic, u: f64, scale: &Scale, spec: &CoefficientSpec) -> Result<f64> {
    match (stat, scale) {
        (Statistic::Correlation, Scale::Ldp) => correlation_ldp_rate(u, spec),
        (Statistic::Beta1, Scale::Ldp) => beta_ldp_rate(u, Asset::First, spec),
        (Statistic::Beta2, Scale::Ldp) => beta_ldp_rate(u, Asset::Second, spec),
        (Statistic::Correlation, Scale::Mdp { .. }) => correlation_mdp_rate(u, spec),
        (Statistic::Beta1, Scale::Mdp { .. }) => beta_mdp_rate(u, Asset::First, spec),
        (Statistic::Beta2, Scale::Mdp { .. }) => beta_mdp_rate(u, Asset::Second, spec),
        _ => unreachable!("vector components are handled separately"),
    }
}

/// Infimum of the relevant rate function over the event.
pub fn predicted_rate(query: &TailQuery, spec: &CoefficientSpec) -> Result<f64> {
    let stat = query.event.statistic();
    match (query.scale, stat.component()) {
        (Scale::Ldp, Some(j)) => match query.event {
            Event::Threshold {
                direction,
                threshold,
                ..
            } => Ok(half_space_dominating_point(spec, j, direction, threshold)?.rate),
            Event::Centered { radius, .. } => {
                let truth = truth_statistic(stat, spec)?;
                let up = half_space_dominating_point(spec, j, Direction::Geq, truth + radius)?.rate;
                let down = half_space_dominating_point(spec, j, Direction::Leq, truth - radius)?.rate;
                Ok(up.min(down))
            }
        },
        (Scale::Mdp { .. }, Some(j)) => {
            let var = MdpCovariance::new(spec).sigma1()[(j, j)];
            let quad = |z: f64| z * z / (2.0 * var);
            Ok(match query.event {
                Event::Threshold {
                    direction,
                    threshold,
                    ..
                } => {
                    if direction.holds(0.0, threshold) {
                        0.0
                    } else {
                        quad(threshold)
                    }
                }
                Event::Centered { radius, .. } => quad(radius),
            })
        }
        (Scale::Ldp, None) => {
            let truth = truth_statistic(stat, spec)?;
            match query.event {
                Event::Threshold {
                    direction,
                    threshold,
                    ..
                } => {
                    if direction.holds(truth, threshold) {
                        Ok(0.0)
                    } else {
                        derived_rate(stat, threshold, &query.scale, spec)
                    }
                }
                Event::Centered { radius, .. } => {
                    let up = derived_rate(stat, truth + radius, &query.scale, spec)?;
                    let down = derived_rate(stat, truth - radius, &query.scale, spec)?;
                    Ok(up.min(down))
                }
            }
        }
        (Scale::Mdp { .. }, None) => match query.event {
            Event::Threshold {
                direction,
                threshold,
                ..
            } => {
                if direction.holds(0.0, threshold) {
                    Ok(0.0)
                } else {
                    derived_rate(stat, threshold, &query.scale, spec)
                }
            }
            Event::Centered { radius, .. } => derived_rate(stat, radius, &query.scale, spec),
        },
    }
}

/// Maps the realized vector to the coordinate in which the event is stated.
struct Normalizer {
    stat: Statistic,
    center: f64,
    factor: f64,
}

impl Normalizer {
    fn new(query: &TailQuery, spec: &CoefficientSpec) -> Result<Self> {
        let stat = query.event.statistic();
        let truth = truth_statistic(stat, spec)?;
        Ok(match (query.scale, query.event) {
            (Scale::Ldp, Event::Threshold { .. }) => Normalizer {
                stat,
                center: 0.0,
                factor: 1.0,
            },
            (Scale::Ldp, Event::Centered { .. }) => Normalizer {
                stat,
                center: truth,
                factor: 1.0,
            },
            (Scale::Mdp { gamma }, _) => Normalizer {
                stat,
                center: truth,
                factor: gamma.normalization(query.n),
            },
        })
    }

    fn hit(&self, event: &Event, v: &[f64; 3]) -> bool {
        match self.stat.evaluate(&RealizedVector::from(*v)) {
            Ok(s) => event.holds(self.factor * (s - self.center)),
            Err(_) => false,
        }
    }
}

fn empirical_rate(p: f64, speed: f64) -> f64 {
    if p > 0.0 {
        -p.ln() / speed
    } else {
        f64::INFINITY
    }
}

/// Fraction of plainly simulated paths in the event, with binomial standard error.
pub fn estimate_tail_naive(query: &TailQuery, spec: &CoefficientSpec) -> Result<TailEstimate> {
    query.validate()?;
    let sampler = PathSampler::new(spec, query.n)?;
    let norm = Normalizer::new(query, spec)?;
    let hits: u64 = block_ranges(query.paths)
        .into_par_iter()
        .map(|(start, end)| {
            (start..end)
                .filter(|&i| {
                    let v = sampler.terminal_vector(derive_seed(query.seed, i as u64));
                    norm.hit(&query.event, &v)
                })
                .count() as u64
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let paths = query.paths as f64;
    let p = hits as f64 / paths;
    let mut flags = Vec::new();
    if hits == 0 {
        flags.push("no path hit the event: increase paths or use the tilted estimator".to_string());
    }
    let speed = query.speed();
    Ok(TailEstimate {
        p_hat: p,
        std_err: (p * (1.0 - p) / paths).sqrt(),
        effective_sample_size: paths,
        empirical_rate: empirical_rate(p, speed),
        predicted_rate: predicted_rate(query, spec)?,
        speed,
        hits,
        paths: query.paths,
        tilt: None,
        flags,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct WeightSums {
    hits: u64,
    w: f64,
    w2: f64,
}

/// Importance sampling under exp(n⟨λ*, V₁ⁿ⟩) with λ* the tilt at the dominating point.
///
/// Requires an LDP-scale threshold event on q1, q2 or c and drift None.
pub fn estimate_tail_tilted(query: &TailQuery, spec: &CoefficientSpec) -> Result<TailEstimate> {
    query.validate()?;
    let (j, direction, threshold) = match (query.scale, query.event) {
        (
            Scale::Ldp,
            Event::Threshold {
                statistic,
                direction,
                threshold,
            },
        ) => match statistic.component() {
            Some(j) => (j, direction, threshold),
            None => {
                return Err(CovolError::Unsupported(
                    "tilted estimation needs a half-space event on q1, q2 or c".into(),
                ))
            }
        },
        _ => {
            return Err(CovolError::Unsupported(
                "tilted estimation needs an LDP-scale threshold event".into(),
            ))
        }
    };
    if !spec.drift().is_none() {
        return Err(CovolError::Unsupported("tilted estimation requires drift None".into()));
    }
    let dominating = half_space_dominating_point(spec, j, direction, threshold)?;
    let mut flags = Vec::new();
    if dominating.rate > 0.0 {
        let check = ldp_rate(dominating.point, spec)?;
        if !check.attained {
            flags.push("rate supremum at the dominating point possibly not attained".to_string());
        }
    }
    let sampler = TiltedSampler::new(spec, query.n, dominating.tilt)?;
    let sums: Vec<WeightSums> = block_ranges(query.paths)
        .into_par_iter()
        .map(|(start, end)| {
            let mut acc = WeightSums::default();
            for i in start..end {
                let (v, lw) = sampler.terminal(derive_seed(query.seed, i as u64));
                if direction.holds(v[j], threshold) {
                    let w = lw.exp();
                    acc.hits += 1;
                    acc.w += w;
                    acc.w2 += w * w;
                }
            }
            acc
        })
        .collect();
    let total = sums.iter().fold(WeightSums::default(), |a, b| WeightSums {
        hits: a.hits + b.hits,
        w: a.w + b.w,
        w2: a.w2 + b.w2,
    });
    let paths = query.paths as f64;
    let p = total.w / paths;
    let var = if query.paths > 1 {
        ((total.w2 / paths - p * p) * paths / (paths - 1.0)).max(0.0)
    } else {
        0.0
    };
    let ess = if total.w2 > 0.0 { total.w * total.w / total.w2 } else { 0.0 };
    if total.hits == 0 {
        flags.push("no path hit the event under the tilted law".to_string());
    }
    if ess < MIN_EFFECTIVE_SAMPLE_SIZE {
        flags.push(format!("degenerate effective sample size {ess:.1}"));
    }
    let speed = query.speed();
    Ok(TailEstimate {
        p_hat: p.min(1.0),
        std_err: (var / paths).sqrt(),
        effective_sample_size: ess,
        empirical_rate: empirical_rate(p, speed),
        predicted_rate: dominating.rate,
        speed,
        hits: total.hits,
        paths: query.paths,
        tilt: Some(dominating.tilt),
        flags,
    })
}

/// Whether [`estimate_tail_tilted`] accepts this query.
pub fn supports_tilting(query: &TailQuery, spec: &CoefficientSpec) -> bool {
    matches!(
        (query.scale, query.event),
        (Scale::Ldp, Event::Threshold { statistic, .. }) if statistic.component().is_some()
    ) && spec.drift().is_none()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub p_hat: f64,
    pub std_err: f64,
    pub empirical_rate: f64,
    pub predicted_rate: f64,
}

/// Tail estimates along increasing n, tilted where supported.
pub fn empirical_rate_curve(query: &TailQuery, spec: &CoefficientSpec, n_list: &[usize]) -> Result<Vec<RatePoint>> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CovolError::Contract("n_list must be strictly increasing".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            let q = TailQuery { n, ..*query };
            let est = if supports_tilting(&q, spec) {
                estimate_tail_tilted(&q, spec)?
            } else {
                estimate_tail_naive(&q, spec)?
            };
            Ok(RatePoint {
                n,
                p_hat: est.p_hat,
                std_err: est.std_err,
                empirical_rate: est.empirical_rate,
                predicted_rate: est.predicted_rate,
            })
        })
        .collect()
}
