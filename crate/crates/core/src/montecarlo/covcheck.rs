//! Sample covariance of √n(V₁ⁿ − [V]₁) against the MDP covariance Σ₁.

use rayon::prelude::*;
use serde::Serialize;

use super::block_ranges;
use crate::coefficients::CoefficientSpec;
use crate::error::{CovolError, Result};
use crate::estimators::integrated_truth;
use crate::ratefn::mdp::MdpCovariance;
use crate::simulate::{derive_seed, PathSampler};

/// Entries of Σ₁ at or below this magnitude get no relative error.
pub const ZERO_ENTRY: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceCheck {
    pub n: usize,
    pub paths: usize,
    pub sigma1: [[f64; 3]; 3],
    pub sample: [[f64; 3]; 3],
    /// Standard error of each sample entry.
    pub std_err: [[f64; 3]; 3],
    /// sample/Σ₁ − 1, or None where Σ₁ vanishes.
    pub relative_error: [[Option<f64>; 3]; 3],
}

impl CovarianceCheck {
    /// Largest |relative error| over the entries that have one.
    pub fn max_relative_error(&self) -> f64 {
        self.relative_error
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |m: f64, e| m.max(e.abs()))
    }
}

#[derive(Clone, Copy, Default)]
struct Moments {
    s1: [f64; 3],
    s2: [[f64; 3]; 3],
    s4: [[f64; 3]; 3],
}

impl Moments {
    fn add(&mut self, y: &[f64; 3]) {
        for i in 0..3 {
            self.s1[i] += y[i];
            for j in 0..3 {
                let p = y[i] * y[j];
                self.s2[i][j] += p;
                self.s4[i][j] += p * p;
            }
        }
    }

    fn merge(mut self, o: &Moments) -> Moments {
        for i in 0..3 {
            self.s1[i] += o.s1[i];
            for j in 0..3 {
                self.s2[i][j] += o.s2[i][j];
                self.s4[i][j] += o.s4[i][j];
            }
        }
        self
    }
}

pub fn covariance_check(spec: &CoefficientSpec, n: usize, paths: usize, seed: u64) -> Result<CovarianceCheck> {
    if paths < 2 {
        return Err(CovolError::domain("paths", paths as f64, "need at least two paths"));
    }
    let sampler = PathSampler::new(spec, n)?;
    let truth = integrated_truth(spec, 1.0)?.as_array();
    let root_n = (n as f64).sqrt();
    let blocks: Vec<Moments> = block_ranges(paths)
        .into_par_iter()
        .map(|(start, end)| {
            let mut m = Moments::default();
            for i in start..end {
                let v = sampler.terminal_vector(derive_seed(seed, i as u64));
                m.add(&[0, 1, 2].map(|k| root_n * (v[k] - truth[k])));
            }
            m
        })
        .collect();
    let total = blocks.iter().fold(Moments::default(), |a, b| a.merge(b));
    let np = paths as f64;
    let mean = total.s1.map(|s| s / np);
    let sigma = *MdpCovariance::new(spec).sigma1();
    let mut out = CovarianceCheck {
        n,
        paths,
        sigma1: [[0.0; 3]; 3],
        sample: [[0.0; 3]; 3],
        std_err: [[0.0; 3]; 3],
        relative_error: [[None; 3]; 3],
    };
    for i in 0..3 {
        for j in 0..3 {
            let raw = total.s2[i][j] / np;
            let cov = (total.s2[i][j] - np * mean[i] * mean[j]) / (np - 1.0);
            let spread = (total.s4[i][j] / np - raw * raw).max(0.0);
            out.sigma1[i][j] = sigma[(i, j)];
            out.sample[i][j] = cov;
            out.std_err[i][j] = (spread / np).sqrt();
            if sigma[(i, j)].abs() > ZERO_ENTRY {
                out.relative_error[i][j] = Some(cov / sigma[(i, j)] - 1.0);
            }
        }
    }
    Ok(out)
}
