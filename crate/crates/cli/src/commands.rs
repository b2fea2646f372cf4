use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::ValueEnum;
use covol_core::montecarlo::tail::supports_tilting;
use covol_core::verify::{run_criterion, spec_checks, VerifyReport, CRITERIA};
use covol_core::{
    beta_ldp_rate, beta_mdp_rate, correlation_ldp_rate, correlation_mdp_rate, covariance_check, derive_seed,
    empirical_rate_curve, estimate_tail_naive, estimate_tail_tilted, ldp_rate, mdp_argmax, mdp_rate,
    realized_beta, realized_correlation, realized_vector, tilde_vector, Asset, CoefficientSpec, CovolError, Event,
    PathSampler, RealizedVector, SamplePath, Scale, TailQuery,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::output::{emit, number, with_numbers};
use crate::{CovcheckArgs, EstimateArgs, RateArgs, SimulateArgs, TailArgs, VerifyArgs};

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;

/// Exit 2 for failures of the numerics, 1 for everything the caller can fix.
pub fn exit_code(e: &anyhow::Error) -> ExitCode {
    let numerical = e.chain().any(|c| {
        c.downcast_ref::<CovolError>().is_some_and(CovolError::is_numerical) || c.is::<CriteriaFailed>()
    });
    ExitCode::from(if numerical { EXIT_NUMERICAL } else { EXIT_VALIDATION })
}

#[derive(Debug)]
struct CriteriaFailed(Vec<u8>);

impl std::fmt::Display for CriteriaFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "acceptance criteria failed: {:?}", self.0)
    }
}

impl std::error::Error for CriteriaFailed {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StatName {
    Correlation,
    Beta1,
    Beta2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScaleName {
    #[default]
    Ldp,
    Mdp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TailMethod {
    /// Tilted when the event and spec allow it, naive otherwise.
    Auto,
    Naive,
    Tilted,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{what} {}", path.display()))
}

fn read_spec(path: &Path) -> anyhow::Result<CoefficientSpec> {
    read_json(path, "spec")
}

pub fn simulate(a: SimulateArgs) -> anyhow::Result<ExitCode> {
    let spec = read_spec(&a.spec)?;
    if a.paths == 0 {
        bail!("--paths must be at least 1");
    }
    let sampler = PathSampler::new(&spec, a.n)?;
    let mut files = Vec::new();
    for i in 0..a.paths {
        let (file, seed) = if a.paths == 1 {
            (a.out.clone(), a.seed)
        } else {
            (indexed(&a.out, i, a.paths), derive_seed(a.seed, i as u64))
        };
        let out = fs::File::create(&file).with_context(|| format!("creating {}", file.display()))?;
        sampler.sample(seed).write_csv(BufWriter::new(out))?;
        files.push(json!({ "path": file, "seed": seed }));
    }
    emit(
        json!({ "files": files }),
        json!({ "command": "simulate", "spec": spec, "n": a.n, "seed": a.seed, "paths": a.paths, "out": a.out }),
    )?;
    Ok(ExitCode::SUCCESS)
}

/// `out.csv` → `out_007.csv`.
fn indexed(out: &Path, i: usize, total: usize) -> PathBuf {
    let width = (total - 1).to_string().len();
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_{i:0width$}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{i:0width$}"),
    };
    out.with_file_name(name)
}

fn estimates(v: &RealizedVector) -> Value {
    let opt = |r: covol_core::Result<f64>| r.map(number).unwrap_or(Value::Null);
    json!({
        "q1": v.q1,
        "q2": v.q2,
        "c": v.c,
        "rho_hat": opt(realized_correlation(v)),
        "beta1": opt(realized_beta(v, Asset::First)),
        "beta2": opt(realized_beta(v, Asset::Second)),
    })
}

pub fn estimate(a: EstimateArgs) -> anyhow::Result<ExitCode> {
    if !(a.t > 0.0 && a.t <= 1.0) {
        bail!("--t must lie in (0, 1], got {}", a.t);
    }
    let file = fs::File::open(&a.path).with_context(|| format!("opening {}", a.path.display()))?;
    let path = SamplePath::read_csv(file, 0).with_context(|| format!("path {}", a.path.display()))?;
    let mut body = estimates(&realized_vector(&path, a.t));
    let spec = a.spec.as_deref().map(read_spec).transpose()?;
    if let Some(spec) = &spec {
        if !spec.drift().is_none() {
            body["drift_corrected"] = estimates(&tilde_vector(&path, spec, a.t)?);
        }
    }
    emit(
        body,
        json!({ "command": "estimate", "path": a.path, "n": path.n(), "t": a.t, "spec": spec }),
    )?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateQuery {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    statistic: Option<StatName>,
    #[serde(default)]
    scale: ScaleName,
}

fn rate_query(a: &RateArgs) -> anyhow::Result<RateQuery> {
    if let Some(file) = &a.query {
        return read_json(file, "rate query");
    }
    let x = match &a.x {
        Some(v) if v.len() == 3 => Some([v[0], v[1], v[2]]),
        Some(v) => bail!("--x needs three comma-separated values, got {}", v.len()),
        None => None,
    };
    Ok(RateQuery {
        x,
        u: a.u,
        statistic: a.statistic,
        scale: a.scale,
    })
}

pub fn rate(a: RateArgs) -> anyhow::Result<ExitCode> {
    let spec = read_spec(&a.spec)?;
    let q = rate_query(&a)?;
    let body = match (q.x, q.u, q.statistic) {
        (Some(x), None, None) => match q.scale {
            ScaleName::Ldp => {
                let r = ldp_rate(x, &spec)?;
                json!({
                    "rate": number(r.value),
                    "attained": r.attained,
                    "argmax_lambda": r.argmax,
                    "iterations": r.iterations,
                })
            }
            ScaleName::Mdp => {
                let rate = mdp_rate(x, &spec)?;
                let lambda = mdp_argmax(x, &spec)?;
                json!({ "rate": number(rate), "attained": true, "argmax_lambda": lambda })
            }
        },
        (None, Some(u), Some(stat)) => {
            let rate = match (stat, q.scale) {
                (StatName::Correlation, ScaleName::Ldp) => correlation_ldp_rate(u, &spec)?,
                (StatName::Correlation, ScaleName::Mdp) => correlation_mdp_rate(u, &spec)?,
                (StatName::Beta1, ScaleName::Ldp) => beta_ldp_rate(u, Asset::First, &spec)?,
                (StatName::Beta1, ScaleName::Mdp) => beta_mdp_rate(u, Asset::First, &spec)?,
                (StatName::Beta2, ScaleName::Ldp) => beta_ldp_rate(u, Asset::Second, &spec)?,
                (StatName::Beta2, ScaleName::Mdp) => beta_mdp_rate(u, Asset::Second, &spec)?,
            };
            json!({ "rate": number(rate), "attained": rate.is_finite(), "argmax_lambda": null })
        }
        (None, Some(_), None) => bail!("query field `statistic` is required with `u`"),
        (None, None, Some(_)) => bail!("query field `u` is required with `statistic`"),
        (Some(_), _, _) => bail!("query fields `x` and `u`/`statistic` are mutually exclusive"),
        (None, None, None) => bail!("rate needs a query: --x, --u with --statistic, or --query"),
    };
    emit(body, json!({ "command": "rate", "spec": spec, "query": q }))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TailConfig {
    event: Event,
    n: usize,
    paths: usize,
    scale: Scale,
}

pub fn tail(a: TailArgs) -> anyhow::Result<ExitCode> {
    let spec = read_spec(&a.spec)?;
    let cfg: TailConfig = read_json(&a.query, "tail query")?;
    let query = TailQuery {
        event: cfg.event,
        n: a.n.unwrap_or(cfg.n),
        paths: a.paths.unwrap_or(cfg.paths),
        seed: a.seed,
        scale: cfg.scale,
    };
    let tilted = match a.method {
        TailMethod::Auto => supports_tilting(&query, &spec),
        TailMethod::Naive => false,
        TailMethod::Tilted => true,
    };
    let est = if tilted {
        estimate_tail_tilted(&query, &spec)?
    } else {
        estimate_tail_naive(&query, &spec)?
    };
    let mut body = with_numbers(
        &est,
        &[("empirical_rate", est.empirical_rate), ("predicted_rate", est.predicted_rate)],
    )?;
    body["method"] = json!(if tilted { "tilted" } else { "naive" });
    if let Some(ns) = &a.curve {
        let curve = empirical_rate_curve(&query, &spec, ns)?;
        if let Some(file) = &a.curve_csv {
            let mut csv = String::from("n,p_hat,std_err,empirical_rate,predicted_rate\n");
            for p in &curve {
                writeln!(
                    csv,
                    "{},{:e},{:e},{:e},{:e}",
                    p.n, p.p_hat, p.std_err, p.empirical_rate, p.predicted_rate
                )?;
            }
            fs::write(file, csv).with_context(|| format!("writing {}", file.display()))?;
        }
        body["curve"] = Value::Array(
            curve
                .iter()
                .map(|p| {
                    with_numbers(
                        p,
                        &[("empirical_rate", p.empirical_rate), ("predicted_rate", p.predicted_rate)],
                    )
                })
                .collect::<anyhow::Result<_>>()?,
        );
    }
    emit(
        body,
        json!({ "command": "tail", "spec": spec, "query": query, "method": a.method, "curve": a.curve }),
    )?;
    Ok(ExitCode::SUCCESS)
}

pub fn verify(a: VerifyArgs) -> anyhow::Result<ExitCode> {
    let spec = a.spec.as_deref().map(read_spec).transpose()?;
    let ids: Vec<u8> = match &a.only {
        Some(ids) => ids.clone(),
        None => CRITERIA.iter().map(|c| c.0).collect(),
    };
    let criteria = ids
        .iter()
        .map(|&id| run_criterion(id, a.level, a.seed))
        .collect::<covol_core::Result<Vec<_>>>()?;
    for c in &criteria {
        eprintln!(
            "criterion {:>2} {} {}: {}",
            c.id,
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.summary
        );
    }
    let report = VerifyReport {
        level: a.level,
        seed: a.seed,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    };
    if let Some(file) = &a.curve_csv {
        let mut csv = String::from("n,exact_rate,target\n");
        if let Some(c) = report.criteria.iter().find(|c| c.id == 6) {
            let m = &c.metrics;
            if let (Some(ns), Some(rates)) = (m["n"].as_array(), m["exact_rates"].as_array()) {
                for (n, r) in ns.iter().zip(rates) {
                    writeln!(csv, "{n},{r},{}", m["target"])?;
                }
            }
        }
        fs::write(file, csv).with_context(|| format!("writing {}", file.display()))?;
    }
    let checks = spec.as_ref().map(spec_checks);
    let checks_ok = checks.as_ref().is_none_or(|cs| cs.iter().all(|c| c.passed));
    let mut body = serde_json::to_value(&report)?;
    body["spec_checks"] = json!(checks);
    body["passed"] = json!(report.passed && checks_ok);
    emit(
        body,
        json!({ "command": "verify", "level": a.level, "seed": a.seed, "only": a.only, "spec": spec }),
    )?;
    let mut failed: Vec<u8> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    if !checks_ok {
        failed.push(0);
    }
    if failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(CriteriaFailed(failed).into())
    }
}

pub fn covcheck(a: CovcheckArgs) -> anyhow::Result<ExitCode> {
    let spec = read_spec(&a.spec)?;
    let check = covariance_check(&spec, a.n, a.paths, a.seed)?;
    let mut body = serde_json::to_value(&check)?;
    body["max_relative_error"] = number(check.max_relative_error());
    emit(
        body,
        json!({ "command": "covcheck", "spec": spec, "n": a.n, "paths": a.paths, "seed": a.seed }),
    )?;
    Ok(ExitCode::SUCCESS)
}
