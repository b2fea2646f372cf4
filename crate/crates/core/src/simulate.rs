//! Exact-in-law sampling of discrete observations, plain and exponentially tilted.
//!
//! Martingale increments over each observation interval are drawn from their
//! exact bivariate Gaussian law. Every interval draws its normals from its own
//! generator seeded by `derive_seed(path_seed, k)`, so paths are reproducible
//! regardless of how work is scheduled.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

use crate::coefficients::{CoefficientSpec, Drift, IncrementMoments};
use crate::error::{CovolError, Result};
use crate::ratefn::pointwise::GaussianQuadCgf;

/// Euler substeps per observation interval for state-dependent drift.
pub const DRIFT_SUBSTEPS: usize = 8;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` of `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index ^ 0x6A09_E667_F3BC_C909))
}

/// Pure ∫σ dB increments, one per observation interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingalePart {
    pub dm1: Vec<f64>,
    pub dm2: Vec<f64>,
}

/// Observations (X₁, X₂) at t_k = k/n, k = 0..=n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePath {
    n: usize,
    x1: Vec<f64>,
    x2: Vec<f64>,
    seed: u64,
    martingale_part: Option<MartingalePart>,
}

impl SamplePath {
    /// Path from raw observations, without a martingale part.
    pub fn from_observations(x1: Vec<f64>, x2: Vec<f64>, seed: u64) -> Result<Self> {
        if x1.len() < 2 || x1.len() != x2.len() {
            return Err(CovolError::Contract(format!(
                "need two equal-length series with at least two points (got {} and {})",
                x1.len(),
                x2.len()
            )));
        }
        if x1.iter().chain(&x2).any(|v| !v.is_finite()) {
            return Err(CovolError::Contract("observations must be finite".into()));
        }
        Ok(SamplePath {
            n: x1.len() - 1,
            x1,
            x2,
            seed,
            martingale_part: None,
        })
    }

    /// Path starting at 0 built from increments.
    pub fn from_increments(dx1: &[f64], dx2: &[f64], seed: u64) -> Result<Self> {
        let cumulate = |d: &[f64]| {
            let mut out = Vec::with_capacity(d.len() + 1);
            out.push(0.0);
            let mut acc = 0.0;
            for v in d {
                acc += v;
                out.push(acc);
            }
            out
        };
        Self::from_observations(cumulate(dx1), cumulate(dx2), seed)
    }

    pub fn with_martingale_part(mut self, part: MartingalePart) -> Result<Self> {
        if part.dm1.len() != self.n || part.dm2.len() != self.n {
            return Err(CovolError::Contract(format!(
                "martingale part must hold {} increments per asset",
                self.n
            )));
        }
        self.martingale_part = Some(part);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x1(&self) -> &[f64] {
        &self.x1
    }

    pub fn x2(&self) -> &[f64] {
        &self.x2
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn martingale_part(&self) -> Option<&MartingalePart> {
        self.martingale_part.as_ref()
    }

    /// (ΔX₁, ΔX₂) on interval k, 0-based.
    pub fn increment(&self, k: usize) -> (f64, f64) {
        (self.x1[k + 1] - self.x1[k], self.x2[k + 1] - self.x2[k])
    }

    pub fn increments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.n).map(|k| self.increment(k))
    }

    /// CSV with header `t,x1,x2` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| CovolError::Numerical(format!("CSV write failed: {e}"));
        w.write_record(["t", "x1", "x2"]).map_err(io)?;
        for k in 0..=self.n {
            let t = k as f64 / self.n as f64;
            w.write_record([
                format!("{t:.16e}"),
                format!("{:.16e}", self.x1[k]),
                format!("{:.16e}", self.x2[k]),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| CovolError::Numerical(format!("CSV write failed: {e}")))
    }

    /// Reads a CSV written by [`SamplePath::write_csv`]; the martingale part is not stored.
    pub fn read_csv<R: Read>(input: R, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let bad = |msg: String| CovolError::Contract(format!("path CSV: {msg}"));
        let headers = r.headers().map_err(|e| bad(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["t", "x1", "x2"] {
            return Err(bad(format!("expected header t,x1,x2, got {headers:?}")));
        }
        let mut x1 = Vec::new();
        let mut x2 = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let field = |j: usize| -> Result<f64> {
                rec.get(j)
                    .ok_or_else(|| bad(format!("row {}: missing column {j}", i + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("row {}: {e}", i + 1)))
            };
            x1.push(field(1)?);
            x2.push(field(2)?);
        }
        Self::from_observations(x1, x2, seed)
    }
}

/// Lower Cholesky factor of a 2×2 covariance, applied to standard normals.
#[derive(Debug, Clone, Copy)]
struct Factor {
    l11: f64,
    l21: f64,
    l22: f64,
}

impl Factor {
    /// Factor of diag(√a₁, √a₂)·S·diag(√a₁, √a₂) where S = [[s11, s12], [s12, s22]].
    fn scaled(a1: f64, a2: f64, s: [f64; 3]) -> Self {
        let l11 = s[0].sqrt();
        let l21 = s[2] / l11;
        let l22 = (s[1] - l21 * l21).max(0.0).sqrt();
        let (r1, r2) = (a1.sqrt(), a2.sqrt());
        Factor {
            l11: r1 * l11,
            l21: r2 * l21,
            l22: r2 * l22,
        }
    }

    fn untilted(m: &IncrementMoments, k: usize) -> Self {
        Self::scaled(m.a1[k], m.a2[k], [1.0, 1.0, m.c[k]])
    }

    #[inline]
    fn apply(&self, z1: f64, z2: f64) -> (f64, f64) {
        (self.l11 * z1, self.l21 * z1 + self.l22 * z2)
    }
}

#[inline]
fn normal_pair<R: rand::Rng>(rng: &mut R) -> (f64, f64) {
    (StandardNormal.sample(rng), StandardNormal.sample(rng))
}

#[derive(Debug, Clone)]
enum DriftPlan {
    None,
    /// Exact ∫b dt per interval.
    Integrated(Vec<[f64; 2]>),
    /// Euler substeps with exact substep martingale factors.
    Euler {
        factors: Vec<Factor>,
        drift: Drift,
    },
}

/// Reusable sampler for one (spec, n).
#[derive(Debug, Clone)]
pub struct PathSampler {
    n: usize,
    factors: Vec<Factor>,
    plan: DriftPlan,
    initial: [f64; 2],
}

impl PathSampler {
    pub fn new(spec: &CoefficientSpec, n: usize) -> Result<Self> {
        let moments = spec.interval_moments(n)?;
        let factors = (0..n).map(|k| Factor::untilted(&moments, k)).collect();
        let nf = n as f64;
        let plan = match spec.drift() {
            Drift::None => DriftPlan::None,
            Drift::TimeOnly { .. } => DriftPlan::Integrated(
                (0..n)
                    .map(|k| spec.drift_integral(k as f64 / nf, (k + 1) as f64 / nf))
                    .collect(),
            ),
            drift @ Drift::LinearMeanReverting { .. } => {
                let fine = spec.interval_moments(n * DRIFT_SUBSTEPS)?;
                DriftPlan::Euler {
                    factors: (0..fine.n).map(|j| Factor::untilted(&fine, j)).collect(),
                    drift: drift.clone(),
                }
            }
        };
        Ok(PathSampler {
            n,
            factors,
            plan,
            initial: [0.0, 0.0],
        })
    }

    pub fn with_initial(mut self, x0: [f64; 2]) -> Self {
        self.initial = x0;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Visits (ΔX₁, ΔX₂, ΔM₁, ΔM₂) for every interval in order.
    fn walk<F: FnMut(usize, f64, f64, f64, f64)>(&self, seed: u64, mut visit: F) {
        let mut x = self.initial;
        let h = 1.0 / (self.n * DRIFT_SUBSTEPS) as f64;
        for k in 0..self.n {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, k as u64));
            let (dm1, dm2, dx1, dx2) = match &self.plan {
                DriftPlan::None => {
                    let (z1, z2) = normal_pair(&mut rng);
                    let (d1, d2) = self.factors[k].apply(z1, z2);
                    (d1, d2, d1, d2)
                }
                DriftPlan::Integrated(b) => {
                    let (z1, z2) = normal_pair(&mut rng);
                    let (d1, d2) = self.factors[k].apply(z1, z2);
                    (d1, d2, d1 + b[k][0], d2 + b[k][1])
                }
                DriftPlan::Euler { factors, drift } => {
                    let (mut m1, mut m2) = (0.0, 0.0);
                    let start = x;
                    let mut y = x;
                    for j in 0..DRIFT_SUBSTEPS {
                        let idx = k * DRIFT_SUBSTEPS + j;
                        let b = drift.eval(idx as f64 * h, y);
                        let (z1, z2) = normal_pair(&mut rng);
                        let (d1, d2) = factors[idx].apply(z1, z2);
                        y[0] += b[0] * h + d1;
                        y[1] += b[1] * h + d2;
                        m1 += d1;
                        m2 += d2;
                    }
                    (m1, m2, y[0] - start[0], y[1] - start[1])
                }
            };
            x[0] += dx1;
            x[1] += dx2;
            visit(k, dx1, dx2, dm1, dm2);
        }
    }

    pub fn sample(&self, seed: u64) -> SamplePath {
        let mut x1 = Vec::with_capacity(self.n + 1);
        let mut x2 = Vec::with_capacity(self.n + 1);
        let mut dm1 = Vec::with_capacity(self.n);
        let mut dm2 = Vec::with_capacity(self.n);
        x1.push(self.initial[0]);
        x2.push(self.initial[1]);
        let exact_diffs = matches!(self.plan, DriftPlan::None);
        self.walk(seed, |k, d1, d2, m1, m2| {
            x1.push(x1[k] + d1);
            x2.push(x2[k] + d2);
            if exact_diffs {
                // Without drift X − Y is X itself; store its differences so
                // both realized vectors agree to the last bit.
                dm1.push(x1[k + 1] - x1[k]);
                dm2.push(x2[k + 1] - x2[k]);
            } else {
                dm1.push(m1);
                dm2.push(m2);
            }
        });
        SamplePath {
            n: self.n,
            x1,
            x2,
            seed,
            martingale_part: Some(MartingalePart { dm1, dm2 }),
        }
    }

    /// V₁ⁿ(X) of the path with this seed, without storing the path.
    pub fn terminal_vector(&self, seed: u64) -> [f64; 3] {
        let mut v = [0.0; 3];
        self.walk(seed, |_, d1, d2, _, _| {
            v[0] += d1 * d1;
            v[1] += d2 * d2;
            v[2] += d1 * d2;
        });
        v
    }
}

pub fn simulate_path(spec: &CoefficientSpec, n: usize, seed: u64) -> Result<SamplePath> {
    Ok(PathSampler::new(spec, n)?.sample(seed))
}

/// A path drawn under the tilted law with its log importance weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltedSample {
    pub path: SamplePath,
    /// log dP/dP_λ = −n⟨λ, V₁ⁿ⟩ + nΛ_n(λ).
    pub log_weight: f64,
}

/// Sampler for the law tilted by exp(n⟨λ, V₁ⁿ⟩); drift must be None.
#[derive(Debug, Clone)]
pub struct TiltedSampler {
    n: usize,
    lambda: [f64; 3],
    factors: Vec<Factor>,
    log_normalizer: f64,
}

impl TiltedSampler {
    pub fn new(spec: &CoefficientSpec, n: usize, lambda: [f64; 3]) -> Result<Self> {
        if !spec.drift().is_none() {
            return Err(CovolError::Contract("tilted sampling requires drift None".into()));
        }
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(CovolError::Contract("tilt must be finite".into()));
        }
        let m = spec.interval_moments(n)?;
        let nf = n as f64;
        let mut factors = Vec::with_capacity(n);
        let mut log_normalizer = 0.0;
        for k in 0..n {
            let mu = [
                nf * lambda[0] * m.a1[k],
                nf * lambda[1] * m.a2[k],
                nf * lambda[2] * (m.a1[k] * m.a2[k]).sqrt(),
            ];
            let cgf = GaussianQuadCgf::new(m.c[k]);
            let s = cgf
                .tilted_covariance(&mu)
                .ok_or(CovolError::TiltOutOfDomain { interval: k + 1 })?;
            log_normalizer += cgf.value(&mu);
            factors.push(if lambda == [0.0; 3] {
                Factor::untilted(&m, k)
            } else {
                Factor::scaled(m.a1[k], m.a2[k], s)
            });
        }
        Ok(TiltedSampler {
            n,
            lambda,
            factors,
            log_normalizer,
        })
    }

    /// nΛ_n(λ).
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn lambda(&self) -> [f64; 3] {
        self.lambda
    }

    fn walk<F: FnMut(usize, f64, f64)>(&self, seed: u64, mut visit: F) {
        for (k, f) in self.factors.iter().enumerate() {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, k as u64));
            let (z1, z2) = normal_pair(&mut rng);
            let (d1, d2) = f.apply(z1, z2);
            visit(k, d1, d2);
        }
    }

    fn log_weight(&self, v: &[f64; 3]) -> f64 {
        let nf = self.n as f64;
        let l = &self.lambda;
        -nf * (l[0] * v[0] + l[1] * v[1] + l[2] * v[2]) + self.log_normalizer
    }

    pub fn sample(&self, seed: u64) -> TiltedSample {
        let mut x1 = Vec::with_capacity(self.n + 1);
        let mut x2 = Vec::with_capacity(self.n + 1);
        x1.push(0.0);
        x2.push(0.0);
        let mut v = [0.0; 3];
        self.walk(seed, |k, d1, d2| {
            x1.push(x1[k] + d1);
            x2.push(x2[k] + d2);
            v[0] += d1 * d1;
            v[1] += d2 * d2;
            v[2] += d1 * d2;
        });
        let dm1 = x1.windows(2).map(|w| w[1] - w[0]).collect();
        let dm2 = x2.windows(2).map(|w| w[1] - w[0]).collect();
        TiltedSample {
            log_weight: self.log_weight(&v),
            path: SamplePath {
                n: self.n,
                x1,
                x2,
                seed,
                martingale_part: Some(MartingalePart { dm1, dm2 }),
            },
        }
    }

    /// (V₁ⁿ, log weight) without storing the path.
    pub fn terminal(&self, seed: u64) -> ([f64; 3], f64) {
        let mut v = [0.0; 3];
        self.walk(seed, |_, d1, d2| {
            v[0] += d1 * d1;
            v[1] += d2 * d2;
            v[2] += d1 * d2;
        });
        (v, self.log_weight(&v))
    }
}

pub fn simulate_tilted(spec: &CoefficientSpec, n: usize, lambda: [f64; 3], seed: u64) -> Result<TiltedSample> {
    Ok(TiltedSampler::new(spec, n, lambda)?.sample(seed))
}
