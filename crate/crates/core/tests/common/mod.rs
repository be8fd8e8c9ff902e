#![allow(dead_code)]

use nudge_iv::glim::{observe, simulate_panel, validate_spec, ScenarioSpec, ValidatedScenario};
use nudge_iv::inference::{bootstrap_statistic, BootstrapConfig};
use nudge_iv::ObservedDataset;

pub fn valid(spec: ScenarioSpec) -> ValidatedScenario {
    validate_spec(spec).expect("fixture validates")
}

pub fn observed(spec: &ValidatedScenario, n: usize, seed: u64) -> ObservedDataset {
    observe(&simulate_panel(spec, n, seed).unwrap()).unwrap()
}

/// Bootstrap standard error of `stat` with `b` replicates.
pub fn boot_se<E: std::fmt::Display>(
    data: &ObservedDataset,
    stat: impl Fn(&ObservedDataset) -> Result<f64, E> + Sync,
    b: usize,
    seed: u64,
) -> f64 {
    bootstrap_statistic(data, stat, &BootstrapConfig::new(b, seed)).unwrap().se
}

/// Exact integral of the polynomial `c[0] + c[1] x + ...` over `[lo, hi]`.
pub fn poly_integral(c: &[f64], lo: f64, hi: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(k, ck)| ck * (hi.powi(k as i32 + 1) - lo.powi(k as i32 + 1)) / (k as f64 + 1.0))
        .sum()
}

pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
