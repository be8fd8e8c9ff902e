//! Exact population values of causal targets and of the Wald-type
//! estimands, obtained by enumeration over discrete confounder supports and
//! piecewise Gauss–Legendre quadrature over continuous ones.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functional::Functional;
use crate::glim::{
    compliance_distribution, potential_treatment_prob, ComplianceProbs, ConfounderLaw,
    StratumId, ThresholdKind, ValidatedScenario, RELEVANCE_TOL,
};

/// Denominators with magnitude at or below this are treated as zero.
pub const ZERO_DENOMINATOR_TOL: f64 = 1e-12;
/// Absolute tolerance on the argument when solving for quantiles.
pub const QUANTILE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("zero denominator in {0}")]
    ZeroDenominator(String),
    #[error("undefined target: {0}")]
    UndefinedTarget(String),
    #[error("unknown stratum `{0}`")]
    UnknownStratum(String),
}

/// Population in which a counterfactual quantity is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subgroup {
    All,
    Compliers,
    Nudgeable,
    Treated,
}

impl Subgroup {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(Subgroup::All),
            "compliers" | "co" => Some(Subgroup::Compliers),
            "nudgeable" | "nudge" => Some(Subgroup::Nudgeable),
            "treated" => Some(Subgroup::Treated),
            _ => None,
        }
    }
}

impl fmt::Display for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subgroup::All => "all",
            Subgroup::Compliers => "compliers",
            Subgroup::Nudgeable => "nudgeable",
            Subgroup::Treated => "treated",
        })
    }
}

/// Scale on which two counterfactual means are contrasted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Difference,
    Ratio,
    OddsRatio,
}

impl Scale {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "difference" => Some(Scale::Difference),
            "ratio" => Some(Scale::Ratio),
            "odds-ratio" | "odds_ratio" => Some(Scale::OddsRatio),
            _ => None,
        }
    }

    /// Combines `μ(1)` and `μ(0)`; `None` when the scale is undefined.
    pub fn combine(self, mu1: f64, mu0: f64) -> Option<f64> {
        match self {
            Scale::Difference => Some(mu1 - mu0),
            Scale::Ratio => (mu0 != 0.0).then(|| mu1 / mu0),
            Scale::OddsRatio => {
                let inside = |m: f64| m > 0.0 && m < 1.0;
                (inside(mu1) && inside(mu0)).then(|| (mu1 / (1.0 - mu1)) / (mu0 / (1.0 - mu0)))
            }
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Difference => "difference",
            Scale::Ratio => "ratio",
            Scale::OddsRatio => "odds-ratio",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    Late,
    Nate,
    Ate,
    Att,
    Mean { arm: bool, group: Subgroup },
    Quantile { arm: bool, q: f64, group: Subgroup },
    Contrast { scale: Scale, group: Subgroup },
    QuantileContrast { q: f64, group: Subgroup },
}

/// `V = ∅` or `V = L` with a specific stratum value.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    #[default]
    Marginal,
    Stratum(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalTarget {
    #[serde(flatten)]
    pub kind: TargetKind,
    pub conditioning: Conditioning,
}

impl CausalTarget {
    pub fn marginal(kind: TargetKind) -> Self {
        Self {
            kind,
            conditioning: Conditioning::Marginal,
        }
    }

    pub fn in_stratum(kind: TargetKind, label: &str) -> Self {
        Self {
            kind,
            conditioning: Conditioning::Stratum(label.to_string()),
        }
    }

    /// Parses `late`, `nate`, `ate`, `att`, `mean:<a>[:<group>]`,
    /// `quantile:<a>:<q>[:<group>]`, `contrast:<scale>[:<group>]` or
    /// `median-nte[:<group>]`. Groups default to `nudgeable`.
    pub fn parse(s: &str) -> Result<TargetKind, String> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let group = |i: usize| -> Result<Subgroup, String> {
            match parts.get(i) {
                None => Ok(Subgroup::Nudgeable),
                Some(g) => Subgroup::parse(g).ok_or_else(|| format!("unknown subgroup `{g}`")),
            }
        };
        let arm = |i: usize| -> Result<bool, String> {
            match parts.get(i).copied() {
                Some("0") => Ok(false),
                Some("1") => Ok(true),
                other => Err(format!("arm must be 0 or 1, got {other:?}")),
            }
        };
        let prob = |i: usize| -> Result<f64, String> {
            parts
                .get(i)
                .and_then(|t| t.parse::<f64>().ok())
                .filter(|q| *q > 0.0 && *q < 1.0)
                .ok_or_else(|| "quantile level must lie in (0, 1)".to_string())
        };
        let max_parts = |n: usize| {
            if parts.len() > n {
                Err(format!("too many fields in target `{s}`"))
            } else {
                Ok(())
            }
        };
        match parts[0] {
            "late" | "nate" | "ate" | "att" => {
                max_parts(1)?;
                Ok(match parts[0] {
                    "late" => TargetKind::Late,
                    "nate" => TargetKind::Nate,
                    "ate" => TargetKind::Ate,
                    _ => TargetKind::Att,
                })
            }
            "mean" => {
                max_parts(3)?;
                Ok(TargetKind::Mean {
                    arm: arm(1)?,
                    group: group(2)?,
                })
            }
            "quantile" => {
                max_parts(4)?;
                Ok(TargetKind::Quantile {
                    arm: arm(1)?,
                    q: prob(2)?,
                    group: group(3)?,
                })
            }
            "contrast" => {
                max_parts(3)?;
                let scale = parts
                    .get(1)
                    .and_then(|t| Scale::parse(t))
                    .ok_or("contrast needs a scale: difference, ratio or odds-ratio")?;
                Ok(TargetKind::Contrast {
                    scale,
                    group: group(2)?,
                })
            }
            "median-nte" => {
                max_parts(2)?;
                Ok(TargetKind::QuantileContrast {
                    q: 0.5,
                    group: group(1)?,
                })
            }
            other => Err(format!("unknown target `{other}`")),
        }
    }
}

/// Identification diagnostics for one conditioning event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `COV(Δ_y(U,L), π(U,L) | 𝓝 = 1, V)`.
    pub null_cov: f64,
    /// Largest `|π(u,l) − Pr(co | 𝓝 = 1, l)|` over nudge-able support points.
    pub bcs_max_dev: f64,
    pub relevance_ok: bool,
    pub nudge_share: f64,
    pub complier_share: f64,
    pub defier_share: f64,
}

/// The intent-to-treat difference and its split into a covariance term and
/// a NATE term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IttDecomposition {
    /// `E(Y^{z=1}|v) − E(Y^{z=0}|v)` from the observed-data law.
    pub itt: f64,
    /// `2 · COV(Δ_y, π | 𝓝=1, v) · Pr(𝓝=1 | v)`.
    pub covariance_term: f64,
    /// `NATE(v) · (Pr(co|v) − Pr(de|v))`.
    pub nate_term: f64,
}

impl IttDecomposition {
    pub fn residual(&self) -> f64 {
        self.itt - self.covariance_term - self.nate_term
    }
}

/// One integration point of the `(U, L)` law within the conditioning event.
#[derive(Debug, Clone, Copy)]
struct Point {
    l: StratumId,
    u: f64,
    w: f64,
    p0: f64,
    p1: f64,
    comp: ComplianceProbs,
    assign: f64,
}

impl Point {
    fn group_weight(&self, group: Subgroup) -> f64 {
        match group {
            Subgroup::All => 1.0,
            Subgroup::Compliers => self.comp.co,
            Subgroup::Nudgeable => self.comp.nudgeable(),
            Subgroup::Treated => self.assign * self.p1 + (1.0 - self.assign) * self.p0,
        }
    }

    /// `Pr(A^z = a | u, l)`.
    fn take(&self, z: bool, a: bool) -> f64 {
        let p = if z { self.p1 } else { self.p0 };
        if a {
            p
        } else {
            1.0 - p
        }
    }
}

fn strata_in(spec: &ValidatedScenario, cond: &Conditioning) -> Result<Vec<(StratumId, f64)>, OracleError> {
    match cond {
        Conditioning::Marginal => Ok(spec.stratum_ids().map(|l| (l, spec.stratum(l).prob)).collect()),
        Conditioning::Stratum(label) => spec
            .stratum_id(label)
            .map(|l| vec![(l, 1.0)])
            .ok_or_else(|| OracleError::UnknownStratum(label.clone())),
    }
}

fn grid(
    spec: &ValidatedScenario,
    cond: &Conditioning,
    extra: &dyn Fn(StratumId) -> Vec<f64>,
) -> Result<Vec<Point>, OracleError> {
    let mut points = Vec::new();
    for (l, wl) in strata_in(spec, cond)? {
        let assign = spec.stratum(l).propensity.assign_prob;
        for (u, wu) in spec.confounder_nodes(l, &extra(l)) {
            points.push(Point {
                l,
                u,
                w: wl * wu,
                p0: potential_treatment_prob(spec, false, u, l),
                p1: potential_treatment_prob(spec, true, u, l),
                comp: compliance_distribution(spec, u, l),
                assign,
            });
        }
    }
    Ok(points)
}

fn plain_grid(spec: &ValidatedScenario, cond: &Conditioning) -> Result<Vec<Point>, OracleError> {
    grid(spec, cond, &|_| Vec::new())
}

/// Breakpoints in `u` where `E[h(Y^a) | u, l]` is not smooth: only when the
/// outcome is noise-free and continuous, at roots of `m_a(u) = knot`.
fn functional_breaks(spec: &ValidatedScenario, arm: bool, h: &Functional, l: StratumId) -> Vec<f64> {
    let continuous_u = matches!(spec.glim.confounder, ConfounderLaw::UniformInterval { .. });
    if !continuous_u || spec.outcome.noise_sd > 0.0 || spec.outcome.binary_mode {
        return Vec::new();
    }
    let (lo, hi) = (spec.glim.confounder.lower(), spec.glim.confounder.upper());
    let st = spec.stratum(l);
    let poly = if arm { &st.m1 } else { &st.m0 };
    h.breakpoints()
        .into_iter()
        .flat_map(|c| poly.crossings(c, lo, hi))
        .collect()
}

/// `E[h(Y^a) | U = u, L = l]`.
fn conditional_functional(spec: &ValidatedScenario, arm: bool, h: &Functional, u: f64, l: StratumId) -> f64 {
    let m = spec.stratum(l).mean(arm, u);
    if spec.outcome.binary_mode {
        m * h.eval(1.0) + (1.0 - m) * h.eval(0.0)
    } else {
        h.gaussian_expectation(m, spec.outcome.noise_sd)
    }
}

fn effect_at(spec: &ValidatedScenario, p: &Point) -> f64 {
    let st = spec.stratum(p.l);
    st.m1.eval(p.u) - st.m0.eval(p.u)
}

/// `E[h(Y^a) | group, V = v]`.
pub fn counterfactual_functional(
    spec: &ValidatedScenario,
    arm: bool,
    h: &Functional,
    group: Subgroup,
    cond: &Conditioning,
) -> Result<f64, OracleError> {
    let pts = grid(spec, cond, &|l| functional_breaks(spec, arm, h, l))?;
    let (mut num, mut den) = (0.0, 0.0);
    for p in &pts {
        let g = p.w * p.group_weight(group);
        num += g * conditional_functional(spec, arm, h, p.u, p.l);
        den += g;
    }
    if den <= ZERO_DENOMINATOR_TOL {
        return Err(OracleError::UndefinedTarget(format!(
            "subgroup `{group}` has probability {den}"
        )));
    }
    Ok(num / den)
}

fn quantile_bracket(spec: &ValidatedScenario, arm: bool, cond: &Conditioning) -> Result<(f64, f64), OracleError> {
    let pts = plain_grid(spec, cond)?;
    let means: Vec<f64> = pts.iter().map(|p| spec.stratum(p.l).mean(arm, p.u)).collect();
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let centre: f64 = pts.iter().zip(&means).map(|(p, m)| p.w * m).sum();
    let half = 10.0 * (spec.outcome.noise_sd + (hi - lo)) + 1.0;
    Ok((centre.min(lo) - half, centre.max(hi) + half))
}

/// Smallest `c` (to [`QUANTILE_TOL`]) with `cdf(c) ≥ q`, by bisection.
fn bisect_quantile(
    bracket: (f64, f64),
    q: f64,
    cdf: impl Fn(f64) -> Result<f64, OracleError>,
) -> Result<f64, OracleError> {
    let (mut lo, mut hi) = bracket;
    if cdf(lo)? >= q || cdf(hi)? < q {
        return Err(OracleError::UndefinedTarget(format!(
            "level {q} not bracketed on [{lo}, {hi}]"
        )));
    }
    while hi - lo > QUANTILE_TOL {
        let mid = 0.5 * (lo + hi);
        if cdf(mid)? >= q {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn true_quantile(
    spec: &ValidatedScenario,
    arm: bool,
    q: f64,
    group: Subgroup,
    cond: &Conditioning,
) -> Result<f64, OracleError> {
    if spec.outcome.binary_mode {
        return Err(OracleError::UndefinedTarget(
            "quantiles of a binary outcome are not supported".into(),
        ));
    }
    let bracket = quantile_bracket(spec, arm, cond)?;
    bisect_quantile(bracket, q, |c| {
        counterfactual_functional(spec, arm, &Functional::IndicatorLeq { c }, group, cond)
    })
}

/// Exact value of a causal target.
pub fn true_target(spec: &ValidatedScenario, target: &CausalTarget) -> Result<f64, OracleError> {
    let cond = &target.conditioning;
    let effect = |group| -> Result<f64, OracleError> {
        Ok(counterfactual_functional(spec, true, &Functional::Identity, group, cond)?
            - counterfactual_functional(spec, false, &Functional::Identity, group, cond)?)
    };
    match target.kind {
        TargetKind::Late => effect(Subgroup::Compliers),
        TargetKind::Nate => effect(Subgroup::Nudgeable),
        TargetKind::Ate => effect(Subgroup::All),
        TargetKind::Att => effect(Subgroup::Treated),
        TargetKind::Mean { arm, group } => {
            counterfactual_functional(spec, arm, &Functional::Identity, group, cond)
        }
        TargetKind::Quantile { arm, q, group } => true_quantile(spec, arm, q, group, cond),
        TargetKind::Contrast { scale, group } => {
            let mu1 = counterfactual_functional(spec, true, &Functional::Identity, group, cond)?;
            let mu0 = counterfactual_functional(spec, false, &Functional::Identity, group, cond)?;
            scale.combine(mu1, mu0).ok_or_else(|| {
                OracleError::UndefinedTarget(format!("{scale} undefined for means {mu1}, {mu0}"))
            })
        }
        TargetKind::QuantileContrast { q, group } => {
            Ok(true_quantile(spec, true, q, group, cond)? - true_quantile(spec, false, q, group, cond)?)
        }
    }
}

/// Population Wald ratio `[E(Y^{z=1}|v) − E(Y^{z=0}|v)] / [Pr(A^{z=1}=1|v) − Pr(A^{z=0}=1|v)]`,
/// with the numerator written as `E[(m₁ − m₀)(A^{z=1} − A^{z=0}) | v]`.
pub fn exact_wald(spec: &ValidatedScenario, cond: &Conditioning) -> Result<f64, OracleError> {
    let pts = plain_grid(spec, cond)?;
    let (mut num, mut den) = (0.0, 0.0);
    for p in &pts {
        num += p.w * effect_at(spec, p) * (p.p1 - p.p0);
        den += p.w * (p.p1 - p.p0);
    }
    if den.abs() <= ZERO_DENOMINATOR_TOL {
        return Err(OracleError::ZeroDenominator("Wald ratio first stage".into()));
    }
    Ok(num / den)
}

/// Population arm-`a` Wald ratio
/// `[E(1{A^{z=1}=a} h(Y^{z=1})|v) − E(1{A^{z=0}=a} h(Y^{z=0})|v)] / [Pr(A^{z=1}=a|v) − Pr(A^{z=0}=a|v)]`.
pub fn exact_arm_wald(
    spec: &ValidatedScenario,
    arm: bool,
    h: &Functional,
    cond: &Conditioning,
) -> Result<f64, OracleError> {
    let pts = grid(spec, cond, &|l| functional_breaks(spec, arm, h, l))?;
    let (mut num, mut den) = (0.0, 0.0);
    for p in &pts {
        let d = p.take(true, arm) - p.take(false, arm);
        num += p.w * d * conditional_functional(spec, arm, h, p.u, p.l);
        den += p.w * d;
    }
    if den.abs() <= ZERO_DENOMINATOR_TOL {
        return Err(OracleError::ZeroDenominator(format!(
            "arm {} Wald first stage",
            arm as u8
        )));
    }
    Ok(num / den)
}

/// `E(Y | A = 1, v)` under the observed-data law.
fn observed_treated_mean(spec: &ValidatedScenario, cond: &Conditioning) -> Result<f64, OracleError> {
    counterfactual_functional(spec, true, &Functional::Identity, Subgroup::Treated, cond)
}

fn identified_quantile(
    spec: &ValidatedScenario,
    arm: bool,
    q: f64,
    cond: &Conditioning,
) -> Result<f64, OracleError> {
    let bracket = quantile_bracket(spec, arm, cond)?;
    bisect_quantile(bracket, q, |c| {
        exact_arm_wald(spec, arm, &Functional::IndicatorLeq { c }, cond)
    })
}

/// Value of the Wald-type estimand that corresponds to `target`.
pub fn identified_value(spec: &ValidatedScenario, target: &CausalTarget) -> Result<f64, OracleError> {
    let cond = &target.conditioning;
    let arm_mean = |arm| exact_arm_wald(spec, arm, &Functional::Identity, cond);
    match target.kind {
        TargetKind::Late | TargetKind::Nate | TargetKind::Ate => exact_wald(spec, cond),
        TargetKind::Att => Ok(observed_treated_mean(spec, cond)? - arm_mean(false)?),
        TargetKind::Mean { arm, .. } => arm_mean(arm),
        TargetKind::Quantile { arm, q, .. } => identified_quantile(spec, arm, q, cond),
        TargetKind::Contrast { scale, .. } => {
            let (mu1, mu0) = (arm_mean(true)?, arm_mean(false)?);
            scale.combine(mu1, mu0).ok_or_else(|| {
                OracleError::UndefinedTarget(format!("{scale} undefined for means {mu1}, {mu0}"))
            })
        }
        TargetKind::QuantileContrast { q, .. } => {
            Ok(identified_quantile(spec, true, q, cond)? - identified_quantile(spec, false, q, cond)?)
        }
    }
}

/// `|identified estimand − true target|`.
pub fn identification_gap(spec: &ValidatedScenario, target: &CausalTarget) -> Result<f64, OracleError> {
    Ok((identified_value(spec, target)? - true_target(spec, target)?).abs())
}

struct NudgeMoments {
    nudge: f64,
    co: f64,
    de: f64,
    nate: f64,
    pi_bar: f64,
    cov: f64,
}

fn nudge_moments(spec: &ValidatedScenario, pts: &[Point]) -> NudgeMoments {
    let (mut nudge, mut co, mut de, mut eff) = (0.0, 0.0, 0.0, 0.0);
    for p in pts {
        co += p.w * p.comp.co;
        de += p.w * p.comp.de;
        nudge += p.w * p.comp.nudgeable();
        eff += p.w * p.comp.nudgeable() * effect_at(spec, p);
    }
    if nudge <= 0.0 {
        return NudgeMoments {
            nudge,
            co,
            de,
            nate: f64::NAN,
            pi_bar: f64::NAN,
            cov: 0.0,
        };
    }
    let nate = eff / nudge;
    let pi_bar = co / nudge;
    let cov = pts
        .iter()
        .filter_map(|p| {
            let pi = p.comp.complier_share()?;
            Some(p.w * p.comp.nudgeable() * (effect_at(spec, p) - nate) * (pi - pi_bar))
        })
        .sum::<f64>()
        / nudge;
    NudgeMoments {
        nudge,
        co,
        de,
        nate,
        pi_bar,
        cov,
    }
}

/// Null-covariance, balanced-complier-share and relevance diagnostics.
pub fn check_conditions(spec: &ValidatedScenario, cond: &Conditioning) -> Result<ConditionReport, OracleError> {
    let pts = plain_grid(spec, cond)?;
    let m = nudge_moments(spec, &pts);

    let mut bcs_max_dev: f64 = 0.0;
    let mut relevance_ok = true;
    let mut first_stage = 0.0;
    for (l, _) in strata_in(spec, cond)? {
        let in_l: Vec<&Point> = pts.iter().filter(|p| p.l == l).collect();
        let co_l: f64 = in_l.iter().map(|p| p.w * p.comp.co).sum();
        let n_l: f64 = in_l.iter().map(|p| p.w * p.comp.nudgeable()).sum();
        if n_l > 0.0 {
            let pi_l = co_l / n_l;
            for p in &in_l {
                if let Some(pi) = p.comp.complier_share() {
                    bcs_max_dev = bcs_max_dev.max((pi - pi_l).abs());
                }
            }
        }
        let fs_l: f64 = in_l.iter().map(|p| p.w * (p.p1 - p.p0)).sum();
        let wl: f64 = in_l.iter().map(|p| p.w).sum();
        first_stage += fs_l;
        if spec.glim.threshold.kind == ThresholdKind::DegenerateOne {
            relevance_ok &= (fs_l / wl).abs() > RELEVANCE_TOL;
        } else {
            relevance_ok &= in_l.iter().all(|p| (p.p1 - p.p0).abs() > RELEVANCE_TOL);
        }
    }
    relevance_ok &= first_stage.abs() > RELEVANCE_TOL;

    Ok(ConditionReport {
        null_cov: m.cov,
        bcs_max_dev,
        relevance_ok,
        nudge_share: m.co + m.de,
        complier_share: m.co,
        defier_share: m.de,
    })
}

/// Intent-to-treat difference from the observed-data law next to its
/// covariance + NATE decomposition.
pub fn itt_decomposition(spec: &ValidatedScenario, cond: &Conditioning) -> Result<IttDecomposition, OracleError> {
    let pts = plain_grid(spec, cond)?;
    let itt: f64 = pts
        .iter()
        .map(|p| {
            let st = spec.stratum(p.l);
            let (m0, m1) = (st.m0.eval(p.u), st.m1.eval(p.u));
            let ey = |pz: f64| pz * m1 + (1.0 - pz) * m0;
            p.w * (ey(p.p1) - ey(p.p0))
        })
        .sum();
    let m = nudge_moments(spec, &pts);
    if m.nudge <= 0.0 {
        return Err(OracleError::UndefinedTarget("no nudge-able units".into()));
    }
    debug_assert!(m.pi_bar.is_finite());
    Ok(IttDecomposition {
        itt,
        covariance_term: 2.0 * m.cov * m.nudge,
        nate_term: m.nate * (m.co - m.de),
    })
}

/// Population `Pr(A^z = 1 | v)` for `z = 0, 1`.
pub fn potential_treatment_shares(spec: &ValidatedScenario, cond: &Conditioning) -> Result<(f64, f64), OracleError> {
    let pts = plain_grid(spec, cond)?;
    let p0 = pts.iter().map(|p| p.w * p.p0).sum();
    let p1 = pts.iter().map(|p| p.w * p.p1).sum();
    Ok((p0, p1))
}

/// `π(u, l)` at every support/quadrature point of stratum `l`, skipping
/// points with no nudge-able units.
pub fn complier_share_profile(spec: &ValidatedScenario, l: StratumId) -> Vec<(f64, f64)> {
    spec.confounder_nodes(l, &[])
        .into_iter()
        .filter_map(|(u, _)| {
            compliance_distribution(spec, u, l)
                .complier_share()
                .map(|pi| (u, pi))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glim::{
        validate_spec, expit, GlimSpec, InstrumentPropensity, LinkForm, MeanFunction, OutcomeSpec,
        ScenarioSpec, StratumPropensity, ThresholdLaw, Coupling,
    };
    use crate::scenarios;
    use std::collections::BTreeMap;

    fn v(spec: ScenarioSpec) -> ValidatedScenario {
        validate_spec(spec).unwrap()
    }

    fn marginal(kind: TargetKind) -> CausalTarget {
        CausalTarget::marginal(kind)
    }

    #[test]
    fn s1_late_equals_closed_form() {
        let s1 = v(scenarios::s1_monotone());
        // compliers are U in [0.4, 0.7); effect 1 + u has mean 1 + 0.55 there
        let late = true_target(&s1, &marginal(TargetKind::Late)).unwrap();
        assert!((late - 1.55).abs() < 1e-12, "{late}");
        let nate = true_target(&s1, &marginal(TargetKind::Nate)).unwrap();
        assert!((nate - late).abs() < 1e-12);
        assert!(identification_gap(&s1, &marginal(TargetKind::Late)).unwrap() <= 1e-10);
    }

    #[test]
    fn s2_nate_matches_enumeration() {
        let s2 = v(scenarios::s2_logistic());
        // enumerate U in {-1, 1}: N(u) = P0(1-P1) + P1(1-P0) with P_z = expit(z + u)
        let mut num = 0.0;
        let mut den = 0.0;
        for u in [-1.0f64, 1.0] {
            let (p0, p1) = (expit(u), expit(1.0 + u));
            let n = p0 * (1.0 - p1) + p1 * (1.0 - p0);
            num += 0.5 * n * (1.0 + u);
            den += 0.5 * n;
        }
        let expected = num / den;
        let nate = true_target(&s2, &marginal(TargetKind::Nate)).unwrap();
        assert!((nate - expected).abs() < 1e-14);
        let wald = exact_wald(&s2, &Conditioning::Marginal).unwrap();
        assert!((wald - nate).abs() < 1e-10);
    }

    #[test]
    fn s3_arm_wald_recovers_population_means() {
        let s3 = v(scenarios::s3_additive());
        let ate = true_target(&s3, &marginal(TargetKind::Ate)).unwrap();
        assert!((ate - 1.5).abs() < 1e-12);
        let mu1 = exact_arm_wald(&s3, true, &Functional::Identity, &Conditioning::Marginal).unwrap();
        let mu0 = exact_arm_wald(&s3, false, &Functional::Identity, &Conditioning::Marginal).unwrap();
        // E(Y^1) = 1 + 3 E(U), E(Y^0) = E(U) with U ~ Uniform(0, 0.5)
        assert!((mu1 - 1.75).abs() < 1e-10);
        assert!((mu0 - 0.25).abs() < 1e-10);
    }

    #[test]
    fn s4_arm_zero_wald_is_untreated_mean_among_treated() {
        let s4 = v(scenarios::s4_multiplicative());
        let mu0 = exact_arm_wald(&s4, false, &Functional::Identity, &Conditioning::Marginal).unwrap();
        // Pr(A=1|U) ∝ U, so E(Y^0|A=1) = E(U·U)/E(U) = (1/3)/(1/2)
        assert!((mu0 - 2.0 / 3.0).abs() < 1e-10);
        let truth = true_target(
            &s4,
            &marginal(TargetKind::Mean {
                arm: false,
                group: Subgroup::Treated,
            }),
        )
        .unwrap();
        assert!((truth - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn arm_wald_differences_telescope_and_constant_is_one() {
        let s2 = v(scenarios::s2_logistic());
        let m = Conditioning::Marginal;
        let d = exact_arm_wald(&s2, true, &Functional::Identity, &m).unwrap()
            - exact_arm_wald(&s2, false, &Functional::Identity, &m).unwrap();
        assert!((d - exact_wald(&s2, &m).unwrap()).abs() < 1e-12);
        let one = exact_arm_wald(&s2, true, &Functional::Constant { value: 1.0 }, &m).unwrap();
        assert!((one - 1.0).abs() < 1e-14);
    }

    fn cancelling_strata() -> ScenarioSpec {
        let mut per = BTreeMap::new();
        per.insert("a".to_string(), StratumPropensity { p0: 0.0, p1: 1.0, assign_prob: 0.5 });
        per.insert("b".to_string(), StratumPropensity { p0: 1.0, p1: 0.0, assign_prob: 0.5 });
        ScenarioSpec {
            name: "cancel".into(),
            glim: GlimSpec {
                threshold: ThresholdLaw::logistic(Coupling::Independent),
                link: LinkForm::Additive,
                propensity: InstrumentPropensity::PerStratum(per),
                confounder: crate::glim::ConfounderLaw::Discrete(vec![(-0.5, 0.5), (0.5, 0.5)]),
                covariate_law: vec![("a".into(), 0.5), ("b".into(), 0.5)],
            },
            outcome: OutcomeSpec {
                m0: MeanFunction::polynomial(vec![0.0]),
                m1: MeanFunction::polynomial(vec![1.0]),
                noise_sd: 1.0,
                binary_mode: false,
            },
        }
    }

    #[test]
    fn cancelling_first_stages_give_zero_denominator() {
        let s = v(cancelling_strata());
        assert!(matches!(
            exact_wald(&s, &Conditioning::Marginal),
            Err(OracleError::ZeroDenominator(_))
        ));
        assert!(exact_wald(&s, &Conditioning::Stratum("a".into())).is_ok());
        let report = check_conditions(&s, &Conditioning::Marginal).unwrap();
        assert!(!report.relevance_ok);
    }

    #[test]
    fn condition_reports_for_reference_scenarios() {
        let s2 = v(scenarios::s2_logistic());
        let r = check_conditions(&s2, &Conditioning::Marginal).unwrap();
        assert!(r.null_cov.abs() <= 1e-12 && r.bcs_max_dev <= 1e-12 && r.relevance_ok);
        assert!((r.complier_share + r.defier_share - r.nudge_share).abs() <= 1e-12);

        let s1 = v(scenarios::s1_monotone());
        let r = check_conditions(&s1, &Conditioning::Marginal).unwrap();
        assert!(r.null_cov.abs() <= 1e-12 && r.bcs_max_dev == 0.0);
        assert!((r.complier_share - 0.3).abs() < 1e-12 && r.defier_share == 0.0);

        let s3 = v(scenarios::s3_additive());
        let r = check_conditions(&s3, &Conditioning::Marginal).unwrap();
        assert!(r.null_cov.abs() > 1e-3, "{}", r.null_cov);
        assert!(r.bcs_max_dev > 1e-3);
    }

    #[test]
    fn decomposition_residual_vanishes() {
        for spec in scenarios::all() {
            let s = v(spec);
            let d = itt_decomposition(&s, &Conditioning::Marginal).unwrap();
            assert!(d.residual().abs() <= 1e-12, "{}: {:?}", s.name, d);
        }
    }

    #[test]
    fn noise_free_quantiles() {
        let s = v(scenarios::s1_noise_free());
        let q1 = true_target(&s, &marginal(TargetKind::Quantile { arm: true, q: 0.5, group: Subgroup::Nudgeable })).unwrap();
        let q0 = true_target(&s, &marginal(TargetKind::Quantile { arm: false, q: 0.5, group: Subgroup::Nudgeable })).unwrap();
        // compliers: U ~ Uniform(0.4, 0.7); Y^1 = 1 + 2U, Y^0 = U
        assert!((q1 - 2.1).abs() < 1e-9, "{q1}");
        assert!((q0 - 0.55).abs() < 1e-9, "{q0}");
        let gap = identification_gap(&s, &marginal(TargetKind::QuantileContrast { q: 0.5, group: Subgroup::Nudgeable })).unwrap();
        assert!(gap < 1e-9);
    }

    #[test]
    fn target_parsing() {
        assert_eq!(CausalTarget::parse("nate").unwrap(), TargetKind::Nate);
        assert_eq!(
            CausalTarget::parse("mean:0:treated").unwrap(),
            TargetKind::Mean { arm: false, group: Subgroup::Treated }
        );
        assert_eq!(
            CausalTarget::parse("quantile:1:0.25").unwrap(),
            TargetKind::Quantile { arm: true, q: 0.25, group: Subgroup::Nudgeable }
        );
        assert!(CausalTarget::parse("quantile:1:1.5").is_err());
        assert!(CausalTarget::parse("nate:extra").is_err());
        assert!(CausalTarget::parse("bogus").is_err());
    }

    #[test]
    fn unknown_stratum_is_reported() {
        let s = v(scenarios::s2_logistic());
        assert_eq!(
            exact_wald(&s, &Conditioning::Stratum("zzz".into())).unwrap_err(),
            OracleError::UnknownStratum("zzz".into())
        );
    }
}
