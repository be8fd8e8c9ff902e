//! Percentile bootstrap and Monte Carlo studies against oracle truth.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ObservedDataset;
use crate::estimators::{EstimateReport, EstimationError, Estimator};
use crate::glim::{observe, simulate_panel, ModelError, ValidatedScenario};
use crate::oracle::{true_target, CausalTarget, OracleError};
use crate::rng::{self, Domain};

/// Largest tolerated share of failed replicates or replications.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("invalid bootstrap configuration: {0}")]
    InvalidConfig(String),
    #[error("{failed} of {total} {what} failed (limit 10%); first error: {first}")]
    TooManyFailures {
        what: &'static str,
        failed: usize,
        total: usize,
        first: String,
    },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMethod {
    #[default]
    Percentile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub b: usize,
    pub seed: u64,
    pub ci_level: f64,
    pub method: BootstrapMethod,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            b: 1000,
            seed: 0,
            ci_level: 0.95,
            method: BootstrapMethod::Percentile,
        }
    }
}

impl BootstrapConfig {
    pub fn new(b: usize, seed: u64) -> Self {
        Self {
            b,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.b < 2 {
            return Err(InferenceError::InvalidConfig(format!("B = {} < 2", self.b)));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(InferenceError::InvalidConfig(format!(
                "ci_level {} outside (0, 1)",
                self.ci_level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub method: BootstrapMethod,
    pub b: usize,
    pub seed: u64,
    pub ci_level: f64,
    pub successes: usize,
    pub failures: usize,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McStudyResult {
    pub scenario: String,
    pub estimator: Estimator,
    pub target: CausalTarget,
    pub truth: f64,
    pub n: usize,
    pub replications: usize,
    pub failures: usize,
    pub bootstrap: BootstrapConfig,
    pub mean_estimate: f64,
    pub bias: f64,
    /// Standard deviation of the estimates with divisor equal to the number
    /// of successful replications.
    pub sd: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub mean_ci_width: f64,
}

/// Row indices of bootstrap replicate `index`.
pub fn resample_indices(n: usize, seed: u64, index: u64) -> Vec<usize> {
    let mut rng = rng::stream(seed, Domain::Bootstrap, index);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Order statistic at level `p` of sorted values: `x[⌈m·p⌉]` (1-based).
fn order_statistic(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    let k = ((m as f64 * p) - 1e-9).ceil().max(1.0) as usize;
    sorted[k.min(m) - 1]
}

fn check_failures(
    what: &'static str,
    errors: &[String],
    total: usize,
) -> Result<(), InferenceError> {
    if errors.len() as f64 > MAX_FAILURE_SHARE * total as f64 {
        return Err(InferenceError::TooManyFailures {
            what,
            failed: errors.len(),
            total,
            first: errors[0].clone(),
        });
    }
    Ok(())
}

/// Percentile bootstrap of an arbitrary statistic.
pub fn bootstrap_statistic<E, F>(
    data: &ObservedDataset,
    stat: F,
    cfg: &BootstrapConfig,
) -> Result<BootstrapSummary, InferenceError>
where
    E: std::fmt::Display,
    F: Fn(&ObservedDataset) -> Result<f64, E> + Sync,
{
    cfg.validate()?;
    let n = data.len();
    let results: Vec<Result<f64, String>> = (0..cfg.b as u64)
        .into_par_iter()
        .map(|i| {
            let resampled = data.resample(&resample_indices(n, cfg.seed, i));
            stat(&resampled).map_err(|e| e.to_string())
        })
        .collect();

    let mut points = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => errors.push(e),
        }
    }
    check_failures("bootstrap replicates", &errors, cfg.b)?;

    let m = points.len() as f64;
    let mean = points.iter().sum::<f64>() / m;
    let constant = points.iter().all(|p| *p == points[0]);
    let se = if constant {
        0.0
    } else {
        (points.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    };
    points.sort_by(f64::total_cmp);
    let alpha = 1.0 - cfg.ci_level;
    Ok(BootstrapSummary {
        method: cfg.method,
        b: cfg.b,
        seed: cfg.seed,
        ci_level: cfg.ci_level,
        successes: points.len(),
        failures: errors.len(),
        se,
        ci_lo: order_statistic(&points, alpha / 2.0),
        ci_hi: order_statistic(&points, 1.0 - alpha / 2.0),
    })
}

/// Point estimate with its bootstrap summary attached.
pub fn bootstrap(
    data: &ObservedDataset,
    estimator: &Estimator,
    cfg: &BootstrapConfig,
) -> Result<EstimateReport, InferenceError> {
    let mut report = estimator.estimate(data)?;
    let summary = bootstrap_statistic(data, |d| estimator.estimate(d).map(|r| r.point), cfg)?;
    report.bootstrap = Some(summary);
    Ok(report)
}

struct Replication {
    estimate: f64,
    ci_lo: f64,
    ci_hi: f64,
}

fn replicate(
    spec: &ValidatedScenario,
    estimator: &Estimator,
    n: usize,
    cfg: &BootstrapConfig,
    index: u64,
) -> Result<Replication, InferenceError> {
    let sim_seed = rng::derive_seed(cfg.seed, Domain::MonteCarlo, index, 0);
    let boot_seed = rng::derive_seed(cfg.seed, Domain::MonteCarlo, index, 1);
    let data = observe(&simulate_panel(spec, n, sim_seed)?)?;
    let estimate = estimator.estimate(&data)?.point;
    let boot = bootstrap_statistic(
        &data,
        |d| estimator.estimate(d).map(|r| r.point),
        &BootstrapConfig {
            seed: boot_seed,
            ..*cfg
        },
    )?;
    Ok(Replication {
        estimate,
        ci_lo: boot.ci_lo,
        ci_hi: boot.ci_hi,
    })
}

/// Repeats simulate → observe → estimate → bootstrap `reps` times and
/// summarizes the estimates against `target`'s exact value.
pub fn mc_study(
    spec: &ValidatedScenario,
    estimator: &Estimator,
    target: &CausalTarget,
    n: usize,
    reps: usize,
    cfg: &BootstrapConfig,
    progress: bool,
) -> Result<McStudyResult, InferenceError> {
    cfg.validate()?;
    if reps == 0 {
        return Err(InferenceError::InvalidConfig("zero replications".into()));
    }
    let truth = true_target(spec, target)?;
    let done = AtomicUsize::new(0);
    let step = reps.div_ceil(10);
    let results: Vec<Result<Replication, InferenceError>> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let r = replicate(spec, estimator, n, cfg, i);
            let k = done.fetch_add(1, Ordering::Relaxed) + 1;
            if progress && (k.is_multiple_of(step) || k == reps) {
                eprintln!("mc-study {}: {k}/{reps} replications", spec.name);
            }
            r
        })
        .collect();

    let mut ok = Vec::with_capacity(reps);
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(x) => ok.push(x),
            Err(e) => errors.push(e.to_string()),
        }
    }
    check_failures("replications", &errors, reps)?;

    let m = ok.len() as f64;
    let mean_estimate = ok.iter().map(|r| r.estimate).sum::<f64>() / m;
    let bias = mean_estimate - truth;
    let sd = (ok.iter().map(|r| (r.estimate - mean_estimate).powi(2)).sum::<f64>() / m).sqrt();
    let rmse = (ok.iter().map(|r| (r.estimate - truth).powi(2)).sum::<f64>() / m).sqrt();
    let covered = ok.iter().filter(|r| r.ci_lo <= truth && truth <= r.ci_hi).count();
    let mean_ci_width = ok.iter().map(|r| r.ci_hi - r.ci_lo).sum::<f64>() / m;
    Ok(McStudyResult {
        scenario: spec.name.clone(),
        estimator: estimator.clone(),
        target: target.clone(),
        truth,
        n,
        replications: reps,
        failures: errors.len(),
        bootstrap: *cfg,
        mean_estimate,
        bias,
        sd,
        rmse,
        coverage: covered as f64 / m,
        mean_ci_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glim::validate_spec;
    use crate::oracle::TargetKind;
    use crate::scenarios;

    fn toy() -> ObservedDataset {
        ObservedDataset::without_covariates(
            (0..40).map(|i| (i % 2 == 0, if i % 2 == 0 { i % 5 != 0 } else { i % 3 == 0 }, (i as f64 * 0.37).sin())),
        )
        .unwrap()
    }

    #[test]
    fn constant_dataset_has_zero_se() {
        let d = ObservedDataset::without_covariates(
            (0..20).map(|i| (i % 2 == 0, i % 2 == 0, 3.5)),
        )
        .unwrap();
        let r = bootstrap(&d, &Estimator::WaldMarginal, &BootstrapConfig::new(200, 3));
        // Z = A always, so every resample with both arms has ratio 0/1 = 0
        let r = r.unwrap();
        let b = r.bootstrap.unwrap();
        assert_eq!(b.se, 0.0);
        assert_eq!((b.ci_lo, b.ci_hi), (r.point, r.point));
    }

    #[test]
    fn repeated_calls_are_identical() {
        let cfg = BootstrapConfig::new(300, 11);
        let a = bootstrap(&toy(), &Estimator::WaldMarginal, &cfg).unwrap();
        let b = bootstrap(&toy(), &Estimator::WaldMarginal, &cfg).unwrap();
        assert_eq!(a, b);
        let s = a.bootstrap.unwrap();
        assert!(s.ci_lo <= s.ci_hi && s.se > 0.0);
    }

    #[test]
    fn config_is_validated() {
        let mut cfg = BootstrapConfig::new(1, 0);
        assert!(matches!(cfg.validate(), Err(InferenceError::InvalidConfig(_))));
        cfg.b = 10;
        cfg.ci_level = 1.0;
        assert!(matches!(cfg.validate(), Err(InferenceError::InvalidConfig(_))));
    }

    #[test]
    fn failure_cap() {
        let always = |_: &ObservedDataset| -> Result<f64, String> { Err("boom".into()) };
        let err = bootstrap_statistic(&toy(), always, &BootstrapConfig::new(20, 0)).unwrap_err();
        assert!(matches!(err, InferenceError::TooManyFailures { failed: 20, total: 20, .. }));
        let errs = |k: usize| vec!["e".to_string(); k];
        assert!(check_failures("replicates", &errs(2), 20).is_ok());
        assert!(check_failures("replicates", &errs(3), 20).is_err());
    }

    #[test]
    fn order_statistics() {
        let x: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(order_statistic(&x, 0.025), 25.0);
        assert_eq!(order_statistic(&x, 0.975), 975.0);
        assert_eq!(order_statistic(&x[..3], 0.001), 1.0);
    }

    #[test]
    fn small_mc_study_satisfies_rmse_identity() {
        let s2 = validate_spec(scenarios::s2_logistic()).unwrap();
        let target = CausalTarget::marginal(TargetKind::Nate);
        let r = mc_study(&s2, &Estimator::WaldMarginal, &target, 400, 20, &BootstrapConfig::new(50, 5), false)
            .unwrap();
        assert!((r.rmse.powi(2) - r.bias.powi(2) - r.sd.powi(2)).abs() <= 1e-9 * r.rmse.powi(2));
        assert!((0.0..=1.0).contains(&r.coverage));
    }
}
