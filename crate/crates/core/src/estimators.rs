//! Plug-in estimators of the Wald-type estimands from observed `(Z, A, Y, L)`
//! data. Conditional versions standardize stratified empirical means over the
//! empirical law of `L` within each value of `V`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::data::ObservedDataset;
use crate::data::Observation;
use crate::functional::Functional;
use crate::inference::BootstrapSummary;
use crate::oracle::{Scale, Subgroup, TargetKind};

/// Hard floor on `|first stage|`; below it the ratio is not computed.
pub const FIRST_STAGE_FLOOR: f64 = 1e-8;
/// `|first stage|` below this produces a weak-instrument warning.
pub const WEAK_FIRST_STAGE: f64 = 0.01;
/// Largest number of distinct outcome values the median scan accepts.
pub const MAX_GRID: usize = 1_000_000;
/// `|Ĝ(c)|` at or below this counts as zero in the median scan.
const MOMENT_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("degenerate first stage {value:e} in {context}")]
    DegenerateFirstStage { context: String, value: f64 },
    #[error("no rows with z = {z}")]
    MissingArm { z: u8 },
    #[error("stratum `{stratum}` has no rows with z = {z}")]
    EmptyStratum { stratum: String, z: u8 },
    #[error("invalid scale: {0}")]
    InvalidScale(String),
    #[error("moment function for arm {arm} has no sign change in {context}")]
    NoSignChange { arm: u8, context: String },
    #[error("{distinct} distinct outcome values exceed the scan limit of {MAX_GRID}")]
    GridTooLarge { distinct: usize },
    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),
}

/// Result for one value `v` of the conditioning set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumEstimate {
    pub point: Option<f64>,
    pub first_stage: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimand: String,
    /// Estimate standardized over all of `L` (`V = ∅`).
    pub point: f64,
    pub first_stage: f64,
    pub n: usize,
    pub conditioning: Vec<String>,
    /// Keyed by the `|`-joined values of `V`, or of every covariate when
    /// `V` is empty.
    pub per_stratum: BTreeMap<String, StratumEstimate>,
    pub components: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub bootstrap: Option<BootstrapSummary>,
}

/// Fréchet–Hoeffding bounds on compliance-type shares given
/// `π_z = Pr(A^z = 1 | v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShareBounds {
    pub pi1: f64,
    pub pi0: f64,
    pub complier_lo: f64,
    pub complier_hi: f64,
    pub defier_lo: f64,
    pub defier_hi: f64,
    pub nudge_lo: f64,
    pub nudge_hi: f64,
}

impl ShareBounds {
    pub fn from_shares(pi1: f64, pi0: f64) -> Self {
        let complier_lo = (pi1 - pi0).max(0.0);
        let complier_hi = pi1.min(1.0 - pi0);
        let defier_lo = (pi0 - pi1).max(0.0);
        let defier_hi = (1.0 - pi1).min(pi0);
        Self {
            pi1,
            pi0,
            complier_lo,
            complier_hi,
            defier_lo,
            defier_hi,
            nudge_lo: complier_lo + defier_lo,
            nudge_hi: complier_hi + defier_hi,
        }
    }

    pub fn contains(&self, complier: f64, defier: f64) -> bool {
        let nudge = complier + defier;
        (self.complier_lo..=self.complier_hi).contains(&complier)
            && (self.defier_lo..=self.defier_hi).contains(&defier)
            && (self.nudge_lo..=self.nudge_hi).contains(&nudge)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub conditioning: Vec<String>,
    pub n: usize,
    pub marginal: ShareBounds,
    pub per_stratum: BTreeMap<String, ShareBounds>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStage {
    pub pi1: Option<f64>,
    pub pi0: Option<f64>,
    pub denominator: Option<f64>,
    pub n: usize,
    pub n_z1: usize,
    pub n_z0: usize,
    pub flagged: bool,
}

/// Sufficient statistics of one L-stratum: per `z`, row count and sums of
/// the numerator and denominator variables.
#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    n: [usize; 2],
    f: [f64; 2],
    g: [f64; 2],
}

impl Cell {
    fn total(&self) -> usize {
        self.n[0] + self.n[1]
    }
}

fn cells(
    data: &ObservedDataset,
    f: impl Fn(&Observation) -> f64,
    g: impl Fn(&Observation) -> f64,
) -> Vec<Cell> {
    let mut out = vec![Cell::default(); data.strata().len()];
    for r in data.rows() {
        let c = &mut out[r.stratum as usize];
        let z = r.z as usize;
        c.n[z] += 1;
        c.f[z] += f(r);
        c.g[z] += g(r);
    }
    out
}

/// L-strata ordered by label, and their grouping by the values of `V`.
struct Groups {
    all: Vec<u32>,
    by_v: Vec<(String, Vec<u32>)>,
    labels: Vec<String>,
}

fn group_strata(data: &ObservedDataset, v: &[String]) -> Result<Groups, EstimationError> {
    let names = data.covariate_names();
    let cols = v
        .iter()
        .map(|c| {
            names
                .iter()
                .position(|n| n == c)
                .ok_or_else(|| EstimationError::UnknownCovariate(c.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<String> = (0..data.strata().len() as u32)
        .map(|s| data.stratum_label(s))
        .collect();
    let mut all: Vec<u32> = (0..labels.len() as u32).collect();
    all.sort_by(|a, b| labels[*a as usize].cmp(&labels[*b as usize]));

    let key_cols: Vec<usize> = if cols.is_empty() {
        (0..names.len()).collect()
    } else {
        cols
    };
    let mut by_v: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    if !names.is_empty() {
        for &s in &all {
            let values = &data.strata()[s as usize];
            let key = key_cols
                .iter()
                .map(|&c| values[c].as_str())
                .collect::<Vec<_>>()
                .join("|");
            by_v.entry(key).or_default().push(s);
        }
    }
    Ok(Groups {
        all,
        by_v: by_v.into_iter().collect(),
        labels,
    })
}

#[derive(Debug, Clone, Copy)]
struct Ratio {
    num: f64,
    den: f64,
}

impl Ratio {
    fn value(self, context: &str) -> Result<f64, EstimationError> {
        if self.den.abs() < FIRST_STAGE_FLOOR {
            return Err(EstimationError::DegenerateFirstStage {
                context: context.to_string(),
                value: self.den,
            });
        }
        Ok(self.num / self.den)
    }
}

fn missing_arm(c: &Cell) -> Option<u8> {
    if c.n[1] == 0 {
        Some(1)
    } else if c.n[0] == 0 {
        Some(0)
    } else {
        None
    }
}

/// Standardization weights `n_l / n_S` over the non-empty strata of `strata`.
fn weights(cells: &[Cell], strata: &[u32], labels: &[String]) -> Result<Vec<(u32, f64)>, EstimationError> {
    let total: usize = strata.iter().map(|&s| cells[s as usize].total()).sum();
    let mut out = Vec::new();
    for &s in strata {
        let c = &cells[s as usize];
        if c.total() == 0 {
            continue;
        }
        if let Some(z) = missing_arm(c) {
            return Err(EstimationError::EmptyStratum {
                stratum: labels[s as usize].clone(),
                z,
            });
        }
        out.push((s, c.total() as f64 / total as f64));
    }
    if out.is_empty() {
        return Err(EstimationError::MissingArm { z: 1 });
    }
    Ok(out)
}

fn standardized(cells: &[Cell], strata: &[u32], labels: &[String]) -> Result<Ratio, EstimationError> {
    let mut r = Ratio { num: 0.0, den: 0.0 };
    for (s, w) in weights(cells, strata, labels)? {
        let c = &cells[s as usize];
        let (n1, n0) = (c.n[1] as f64, c.n[0] as f64);
        r.num += w * (c.f[1] / n1 - c.f[0] / n0);
        r.den += w * (c.g[1] / n1 - c.g[0] / n0);
    }
    Ok(r)
}

fn pooled(cells: &[Cell], strata: &[u32]) -> Result<Ratio, EstimationError> {
    let mut sum = Cell::default();
    for &s in strata {
        let c = &cells[s as usize];
        for z in 0..2 {
            sum.n[z] += c.n[z];
            sum.f[z] += c.f[z];
            sum.g[z] += c.g[z];
        }
    }
    if let Some(z) = missing_arm(&sum) {
        return Err(EstimationError::MissingArm { z });
    }
    let (n1, n0) = (sum.n[1] as f64, sum.n[0] as f64);
    Ok(Ratio {
        num: sum.f[1] / n1 - sum.f[0] / n0,
        den: sum.g[1] / n1 - sum.g[0] / n0,
    })
}

fn rows_in(cells: &[Cell], strata: &[u32]) -> usize {
    strata.iter().map(|&s| cells[s as usize].total()).sum()
}

/// What one evaluation over a set of strata produces.
struct Evaluation {
    point: f64,
    first_stage: f64,
    components: Vec<(String, f64)>,
}

fn weak_warning(context: &str, fs: f64) -> Option<String> {
    (fs.abs() < WEAK_FIRST_STAGE).then(|| format!("weak first stage {fs:.6} in {context}"))
}

fn build_report(
    data: &ObservedDataset,
    estimand: String,
    v: &[String],
    eval: impl Fn(&[u32], &str) -> Result<Evaluation, EstimationError>,
) -> Result<EstimateReport, EstimationError> {
    let groups = group_strata(data, v)?;
    let counts = cells(data, |_| 0.0, |_| 0.0);
    let overall = eval(&groups.all, "full sample")?;
    let mut warnings: Vec<String> = weak_warning("full sample", overall.first_stage).into_iter().collect();
    let mut per_stratum = BTreeMap::new();
    for (label, strata) in &groups.by_v {
        let context = format!("stratum `{label}`");
        let n = rows_in(&counts, strata);
        let entry = match eval(strata, &context) {
            Ok(e) => {
                warnings.extend(weak_warning(&context, e.first_stage));
                StratumEstimate {
                    point: Some(e.point),
                    first_stage: Some(e.first_stage),
                    n,
                }
            }
            Err(err) => {
                warnings.push(format!("{context}: {err}"));
                StratumEstimate {
                    point: None,
                    first_stage: None,
                    n,
                }
            }
        };
        per_stratum.insert(label.clone(), entry);
    }
    Ok(EstimateReport {
        estimand,
        point: overall.point,
        first_stage: overall.first_stage,
        n: data.len(),
        conditioning: v.to_vec(),
        per_stratum,
        components: overall.components.into_iter().collect(),
        warnings,
        bootstrap: None,
    })
}

fn join_v(v: &[String]) -> String {
    v.join(",")
}

/// Wald ratio from raw sample means, ignoring covariates for the point.
pub fn wald_marginal(data: &ObservedDataset) -> Result<EstimateReport, EstimationError> {
    let c = cells(data, |r| r.y, |r| r.a as u8 as f64);
    build_report(data, "wald_marginal".into(), &[], |strata, ctx| {
        let r = pooled(&c, strata)?;
        Ok(Evaluation {
            point: r.value(ctx)?,
            first_stage: r.den,
            components: Vec::new(),
        })
    })
}

/// Wald ratio with numerator and denominator standardized over `L` given `V`.
pub fn wald_conditional(data: &ObservedDataset, v: &[String]) -> Result<EstimateReport, EstimationError> {
    let c = cells(data, |r| r.y, |r| r.a as u8 as f64);
    let labels = group_strata(data, &[])?.labels;
    build_report(data, format!("wald_conditional(v={})", join_v(v)), v, |strata, ctx| {
        let r = standardized(&c, strata, &labels)?;
        Ok(Evaluation {
            point: r.value(ctx)?,
            first_stage: r.den,
            components: Vec::new(),
        })
    })
}

fn arm_cells(data: &ObservedDataset, arm: bool, h: &Functional) -> Vec<Cell> {
    cells(
        data,
        |r| if r.a == arm { h.eval(r.y) } else { 0.0 },
        |r| (r.a == arm) as u8 as f64,
    )
}

/// Arm-`a` Wald ratio for the functional `h`, standardized over `L` given `V`.
pub fn arm_wald(
    data: &ObservedDataset,
    arm: bool,
    h: &Functional,
    v: &[String],
) -> Result<EstimateReport, EstimationError> {
    let c = arm_cells(data, arm, h);
    let labels = group_strata(data, &[])?.labels;
    build_report(
        data,
        format!("arm_wald(a={},h={h},v={})", arm as u8, join_v(v)),
        v,
        |strata, ctx| {
            let r = standardized(&c, strata, &labels)?;
            Ok(Evaluation {
                point: r.value(ctx)?,
                first_stage: r.den,
                components: Vec::new(),
            })
        },
    )
}

fn is_binary(data: &ObservedDataset) -> bool {
    data.rows().iter().all(|r| r.y == 0.0 || r.y == 1.0)
}

/// `μ̂(1)` versus `μ̂(0)` on the chosen scale.
pub fn effect_contrast(
    data: &ObservedDataset,
    scale: Scale,
    v: &[String],
) -> Result<EstimateReport, EstimationError> {
    if scale != Scale::Difference && !is_binary(data) {
        return Err(EstimationError::InvalidScale(format!(
            "{scale} requires a binary outcome"
        )));
    }
    let c1 = arm_cells(data, true, &Functional::Identity);
    let c0 = arm_cells(data, false, &Functional::Identity);
    let labels = group_strata(data, &[])?.labels;
    build_report(
        data,
        format!("contrast(scale={scale},v={})", join_v(v)),
        v,
        |strata, ctx| {
            let r1 = standardized(&c1, strata, &labels)?;
            let r0 = standardized(&c0, strata, &labels)?;
            let (mu1, mu0) = (r1.value(ctx)?, r0.value(ctx)?);
            let point = scale.combine(mu1, mu0).ok_or_else(|| {
                EstimationError::InvalidScale(format!(
                    "{scale} undefined for means {mu1}, {mu0} in {ctx}"
                ))
            })?;
            Ok(Evaluation {
                point,
                first_stage: r1.den,
                components: vec![("mu1".into(), mu1), ("mu0".into(), mu0)],
            })
        },
    )
}

/// Row indices sorted by `y`, ties broken by stratum, arm and instrument so
/// that the scan does not depend on row order.
fn outcome_order(data: &ObservedDataset) -> Vec<u32> {
    let rows = data.rows();
    let mut order: Vec<u32> = (0..rows.len() as u32).collect();
    order.sort_unstable_by(|&i, &j| {
        let (a, b) = (&rows[i as usize], &rows[j as usize]);
        a.y.total_cmp(&b.y)
            .then(a.stratum.cmp(&b.stratum))
            .then(a.a.cmp(&b.a))
            .then(a.z.cmp(&b.z))
            .then(i.cmp(&j))
    });
    order
}

/// Smallest observed `y` at which `Ĝ(c) = arm_wald(a, 1{y ≤ c} − 1/2)`
/// changes sign, with `Ĝ` standardized over the strata in `strata`.
fn scan_median(
    data: &ObservedDataset,
    order: &[u32],
    arm: bool,
    strata: &[u32],
    counts: &[Cell],
    labels: &[String],
    ctx: &str,
) -> Result<(f64, f64), EstimationError> {
    let w = weights(counts, strata, labels)?;
    let mut step_of = vec![None; counts.len()];
    let mut den = 0.0;
    for &(s, ws) in &w {
        let c = &counts[s as usize];
        step_of[s as usize] = Some([-ws / c.n[0] as f64, ws / c.n[1] as f64]);
        den += ws * (c.g[1] / c.n[1] as f64 - c.g[0] / c.n[0] as f64);
    }
    if den.abs() < FIRST_STAGE_FLOOR {
        return Err(EstimationError::DegenerateFirstStage {
            context: ctx.to_string(),
            value: den,
        });
    }

    let rows = data.rows();
    let included = || {
        order
            .iter()
            .map(|&i| &rows[i as usize])
            .filter(|r| step_of[r.stratum as usize].is_some())
    };
    let mut distinct = 0usize;
    let mut last = None;
    for r in included() {
        if last != Some(r.y) {
            distinct += 1;
            last = Some(r.y);
        }
    }
    if distinct > MAX_GRID {
        return Err(EstimationError::GridTooLarge { distinct });
    }

    let sign = |num: f64| -> bool {
        // true for Ĝ ≥ 0
        let g = num / den;
        g > -MOMENT_ZERO_TOL
    };
    let mut cum = 0.0;
    let mut initial = None;
    let mut iter = included().peekable();
    while let Some(r) = iter.next() {
        if r.a == arm {
            cum += step_of[r.stratum as usize].unwrap()[r.z as usize];
        }
        if iter.peek().is_some_and(|next| next.y == r.y) {
            continue;
        }
        let s = sign(cum - 0.5 * den);
        match initial {
            None => initial = Some(s),
            Some(s0) if s0 != s => return Ok((r.y, den)),
            _ => {}
        }
    }
    Err(EstimationError::NoSignChange {
        arm: arm as u8,
        context: ctx.to_string(),
    })
}

fn median_report(
    data: &ObservedDataset,
    arms: &[bool],
    estimand: String,
    v: &[String],
) -> Result<EstimateReport, EstimationError> {
    let counts = cells(data, |_| 0.0, |r| r.a as u8 as f64);
    let counts0 = cells(data, |_| 0.0, |r| (!r.a) as u8 as f64);
    let labels = group_strata(data, &[])?.labels;
    let order = outcome_order(data);
    build_report(data, estimand, v, |strata, ctx| {
        let mut bars = Vec::new();
        let mut first_stage = f64::NAN;
        for &arm in arms {
            let c = if arm { &counts } else { &counts0 };
            let (bar, den) = scan_median(data, &order, arm, strata, c, &labels, ctx)?;
            // the arm-0 denominator is minus the treatment first stage
            first_stage = if arm { den } else { -den };
            bars.push((format!("mu_bar_{}", arm as u8), bar));
        }
        let point = if bars.len() == 2 {
            bars[0].1 - bars[1].1
        } else {
            bars[0].1
        };
        Ok(Evaluation {
            point,
            first_stage,
            components: bars,
        })
    })
}

/// `μ̄(a, v)`: root of the median moment for arm `a`.
pub fn median_counterfactual(
    data: &ObservedDataset,
    arm: bool,
    v: &[String],
) -> Result<EstimateReport, EstimationError> {
    median_report(
        data,
        &[arm],
        format!("median(a={},v={})", arm as u8, join_v(v)),
        v,
    )
}

/// Median nudge treatment effect `μ̄(1, v) − μ̄(0, v)`.
pub fn median_nte(data: &ObservedDataset, v: &[String]) -> Result<EstimateReport, EstimationError> {
    median_report(data, &[true, false], format!("median_nte(v={})", join_v(v)), v)
}

/// Standardized `π̂_z = P̂r(A = 1 | Z = z, v)` over the strata in `strata`.
fn treatment_shares(cells: &[Cell], strata: &[u32], labels: &[String]) -> Result<(f64, f64), EstimationError> {
    let (mut pi1, mut pi0) = (0.0, 0.0);
    for (s, w) in weights(cells, strata, labels)? {
        let c = &cells[s as usize];
        pi1 += w * c.g[1] / c.n[1] as f64;
        pi0 += w * c.g[0] / c.n[0] as f64;
    }
    Ok((pi1, pi0))
}

/// Fréchet–Hoeffding bounds on complier, defier and nudge-able shares.
pub fn frechet_bounds(data: &ObservedDataset, v: &[String]) -> Result<BoundsReport, EstimationError> {
    let groups = group_strata(data, v)?;
    let c = cells(data, |_| 0.0, |r| r.a as u8 as f64);
    let (pi1, pi0) = treatment_shares(&c, &groups.all, &groups.labels)?;
    let mut per_stratum = BTreeMap::new();
    let mut warnings = Vec::new();
    for (label, strata) in &groups.by_v {
        match treatment_shares(&c, strata, &groups.labels) {
            Ok((p1, p0)) => {
                per_stratum.insert(label.clone(), ShareBounds::from_shares(p1, p0));
            }
            Err(e) => warnings.push(format!("stratum `{label}`: {e}")),
        }
    }
    Ok(BoundsReport {
        conditioning: v.to_vec(),
        n: data.len(),
        marginal: ShareBounds::from_shares(pi1, pi0),
        per_stratum,
        warnings,
    })
}

/// Raw first-stage proportions for each value of `V` (one entry keyed `""`
/// when `V` is empty).
pub fn first_stage_diagnostics(
    data: &ObservedDataset,
    v: &[String],
) -> Result<BTreeMap<String, FirstStage>, EstimationError> {
    let groups = group_strata(data, v)?;
    let c = cells(data, |_| 0.0, |r| r.a as u8 as f64);
    let entry = |strata: &[u32]| {
        let mut n = [0usize; 2];
        let mut g = [0.0; 2];
        for &s in strata {
            for z in 0..2 {
                n[z] += c[s as usize].n[z];
                g[z] += c[s as usize].g[z];
            }
        }
        let pi1 = (n[1] > 0).then(|| g[1] / n[1] as f64);
        let pi0 = (n[0] > 0).then(|| g[0] / n[0] as f64);
        let denominator = pi1.zip(pi0).map(|(a, b)| a - b);
        FirstStage {
            pi1,
            pi0,
            denominator,
            n: n[0] + n[1],
            n_z1: n[1],
            n_z0: n[0],
            flagged: denominator.is_none_or(|d| d.abs() < WEAK_FIRST_STAGE),
        }
    };
    let mut out = BTreeMap::new();
    if v.is_empty() {
        out.insert(String::new(), entry(&groups.all));
    } else {
        for (label, strata) in &groups.by_v {
            out.insert(label.clone(), entry(strata));
        }
    }
    Ok(out)
}

/// An estimator with its parameters, usable by the bootstrap and by
/// Monte Carlo studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    WaldMarginal,
    WaldConditional { v: Vec<String> },
    ArmWald { arm: bool, h: Functional, v: Vec<String> },
    Contrast { scale: Scale, v: Vec<String> },
    MedianNte { v: Vec<String> },
}

impl Estimator {
    pub fn estimate(&self, data: &ObservedDataset) -> Result<EstimateReport, EstimationError> {
        match self {
            Estimator::WaldMarginal => wald_marginal(data),
            Estimator::WaldConditional { v } => wald_conditional(data, v),
            Estimator::ArmWald { arm, h, v } => arm_wald(data, *arm, h, v),
            Estimator::Contrast { scale, v } => effect_contrast(data, *scale, v),
            Estimator::MedianNte { v } => median_nte(data, v),
        }
    }

    /// The causal target this estimator is meant to recover among the
    /// nudge-able units, when one exists.
    pub fn default_target(&self) -> Option<TargetKind> {
        let group = Subgroup::Nudgeable;
        match self {
            Estimator::WaldMarginal | Estimator::WaldConditional { .. } => Some(TargetKind::Nate),
            Estimator::ArmWald { arm, h, .. } => {
                (*h == Functional::Identity).then_some(TargetKind::Mean { arm: *arm, group })
            }
            Estimator::Contrast { scale, .. } => Some(TargetKind::Contrast {
                scale: *scale,
                group,
            }),
            Estimator::MedianNte { .. } => Some(TargetKind::QuantileContrast { q: 0.5, group }),
        }
    }
}
