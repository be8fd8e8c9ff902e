//! Generalized latent index (GLIM) treatment-selection scenarios.
//!
//! A scenario draws an observed covariate stratum `L`, an unmeasured
//! confounder `U` and thresholds `(ε₀, ε₁)`, then sets the potential
//! treatments `A^z = 1{h(z, U) ≥ ε_z}` with `h(z, u) = p(z) + u` or
//! `p(z) · u`. Potential outcomes depend on `(a, U, L)` and noise that is
//! independent of everything else, so `C ⫫ (Y¹, Y⁰) | U, L` holds by
//! construction.

use std::collections::BTreeMap;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Observation, ObservedDataset};
use crate::quadrature::piecewise_uniform_nodes;
use crate::rng::{self, Domain};

/// Differences below this are treated as zero in relevance checks.
pub const RELEVANCE_TOL: f64 = 1e-12;
const RANGE_TOL: f64 = 1e-12;
const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("range violation in stratum `{stratum}`: h(z={z}, u={u}) = {value} outside [0, 1]")]
    RangeViolation {
        stratum: String,
        z: u8,
        u: f64,
        value: f64,
    },
    #[error("relevance violation in stratum `{stratum}`{}", at_u(.u))]
    RelevanceViolation { stratum: String, u: Option<f64> },
    #[error("degenerate confounder law: {0}")]
    DegenerateConfounder(String),
    #[error("inconsistent threshold law: {0}")]
    InconsistentThreshold(String),
    #[error("invalid propensity for stratum `{stratum}`: {detail}")]
    InvalidPropensity { stratum: String, detail: String },
    #[error("invalid covariate law: {0}")]
    InvalidCovariateLaw(String),
    #[error("invalid outcome model ({field}): {detail}")]
    InvalidOutcome { field: String, detail: String },
    #[error("panel must contain at least one row")]
    EmptyPanel,
}

fn at_u(u: &Option<f64>) -> String {
    match u {
        Some(u) => format!(": Pr(A^(z=1)=1|u) = Pr(A^(z=0)=1|u) at u = {u}"),
        None => ": Pr(A^(z=1)=1|l) = Pr(A^(z=0)=1|l)".to_string(),
    }
}

impl ModelError {
    /// Location of the offending value in a scenario document.
    pub fn json_path(&self) -> String {
        match self {
            ModelError::RangeViolation { .. } | ModelError::RelevanceViolation { .. } => {
                "glim.propensity".into()
            }
            ModelError::InvalidPropensity { .. } => "glim.propensity".into(),
            ModelError::DegenerateConfounder(_) => "glim.confounder".into(),
            ModelError::InconsistentThreshold(_) => "glim.threshold".into(),
            ModelError::InvalidCovariateLaw(_) => "glim.covariate_law".into(),
            ModelError::InvalidOutcome { field, .. } => format!("outcome.{field}"),
            ModelError::EmptyPanel => String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    DegenerateOne,
    Uniform01,
    Logistic01,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    Independent,
    Common,
}

/// Law of the thresholds `ε_z` and their joint dependence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdLaw {
    pub kind: ThresholdKind,
    pub coupling: Coupling,
}

impl ThresholdLaw {
    pub fn degenerate() -> Self {
        Self {
            kind: ThresholdKind::DegenerateOne,
            coupling: Coupling::Common,
        }
    }

    pub fn uniform(coupling: Coupling) -> Self {
        Self {
            kind: ThresholdKind::Uniform01,
            coupling,
        }
    }

    pub fn logistic(coupling: Coupling) -> Self {
        Self {
            kind: ThresholdKind::Logistic01,
            coupling,
        }
    }

    /// `Pr(ε ≤ h)`.
    pub fn cdf(&self, h: f64) -> f64 {
        match self.kind {
            ThresholdKind::DegenerateOne => {
                if h >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ThresholdKind::Uniform01 => h.clamp(0.0, 1.0),
            ThresholdKind::Logistic01 => expit(h),
        }
    }

    /// Values of `h` where the CDF is not smooth.
    fn kinks(&self) -> &'static [f64] {
        match self.kind {
            ThresholdKind::DegenerateOne => &[1.0],
            ThresholdKind::Uniform01 => &[0.0, 1.0],
            ThresholdKind::Logistic01 => &[],
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.kind {
            ThresholdKind::DegenerateOne => 1.0,
            ThresholdKind::Uniform01 => rng.random::<f64>(),
            ThresholdKind::Logistic01 => {
                let v: f64 = rng.sample(Open01);
                (v / (1.0 - v)).ln()
            }
        }
    }
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkForm {
    Additive,
    Multiplicative,
}

impl LinkForm {
    pub fn apply(self, p: f64, u: f64) -> f64 {
        match self {
            LinkForm::Additive => p + u,
            LinkForm::Multiplicative => p * u,
        }
    }

    /// Confounder values where `h(z, u) = target`.
    fn solve(self, p: f64, target: f64) -> Option<f64> {
        match self {
            LinkForm::Additive => Some(target - p),
            LinkForm::Multiplicative if p != 0.0 => Some(target / p),
            LinkForm::Multiplicative => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumPropensity {
    pub p0: f64,
    pub p1: f64,
    pub assign_prob: f64,
}

impl StratumPropensity {
    pub fn p(&self, z: bool) -> f64 {
        if z {
            self.p1
        } else {
            self.p0
        }
    }
}

/// `p(z)` and `Pr(Z = 1)`, either shared by every stratum or given per stratum.
#[derive(Debug, Clone, PartialEq)]
pub enum InstrumentPropensity {
    Shared(StratumPropensity),
    PerStratum(BTreeMap<String, StratumPropensity>),
}

impl InstrumentPropensity {
    pub fn for_stratum(&self, label: &str) -> Option<StratumPropensity> {
        match self {
            InstrumentPropensity::Shared(p) => Some(*p),
            InstrumentPropensity::PerStratum(m) => m.get(label).copied(),
        }
    }
}

/// Law of the unmeasured confounder `U`, independent of `L`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfounderLaw {
    /// `(value, probability)` pairs.
    Discrete(Vec<(f64, f64)>),
    UniformInterval { lo: f64, hi: f64 },
}

impl ConfounderLaw {
    pub fn lower(&self) -> f64 {
        match self {
            ConfounderLaw::Discrete(s) => s.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
            ConfounderLaw::UniformInterval { lo, .. } => *lo,
        }
    }

    pub fn upper(&self) -> f64 {
        match self {
            ConfounderLaw::Discrete(s) => s.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
            ConfounderLaw::UniformInterval { hi, .. } => *hi,
        }
    }

    /// Integration nodes `(u, weight)` with weights summing to one. Discrete
    /// laws return their support; continuous laws use piecewise
    /// Gauss–Legendre split at `breaks`.
    pub fn nodes(&self, breaks: &[f64]) -> Vec<(f64, f64)> {
        match self {
            ConfounderLaw::Discrete(s) => s.iter().copied().filter(|p| p.1 > 0.0).collect(),
            ConfounderLaw::UniformInterval { lo, hi } => piecewise_uniform_nodes(*lo, *hi, breaks),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ConfounderLaw::Discrete(s) => {
                let v: f64 = rng.random();
                let mut acc = 0.0;
                for &(u, p) in s {
                    acc += p;
                    if v < acc {
                        return u;
                    }
                }
                s.iter().rev().find(|p| p.1 > 0.0).map(|p| p.0).unwrap_or(s[0].0)
            }
            ConfounderLaw::UniformInterval { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Polynomial in `u` with ascending coefficients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn eval(&self, u: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.0.len().max(other.0.len());
        Polynomial(
            (0..n)
                .map(|i| self.0.get(i).unwrap_or(&0.0) + other.0.get(i).unwrap_or(&0.0))
                .collect(),
        )
    }

    /// Points in `(lo, hi)` where the polynomial crosses `level`, located by
    /// a sign scan on 512 cells followed by bisection.
    pub fn crossings(&self, level: f64, lo: f64, hi: f64) -> Vec<f64> {
        let degree = self.0.iter().rposition(|c| *c != 0.0).unwrap_or(0);
        if degree == 0 {
            return Vec::new();
        }
        if degree == 1 {
            let root = (level - self.0[0]) / self.0[1];
            return if root > lo && root < hi { vec![root] } else { Vec::new() };
        }
        let cells = 512;
        let f = |u: f64| self.eval(u) - level;
        let mut out = Vec::new();
        let step = (hi - lo) / cells as f64;
        let mut a = lo;
        let mut fa = f(a);
        for k in 1..=cells {
            let b = if k == cells { hi } else { lo + step * k as f64 };
            let fb = f(b);
            if fa == 0.0 && a > lo {
                out.push(a);
            } else if fa * fb < 0.0 {
                let (mut x0, mut x1, mut f0) = (a, b, fa);
                for _ in 0..200 {
                    let mid = 0.5 * (x0 + x1);
                    let fm = f(mid);
                    if fm == 0.0 || mid == x0 || mid == x1 {
                        x0 = mid;
                        x1 = mid;
                        break;
                    }
                    if f0 * fm < 0.0 {
                        x1 = mid;
                    } else {
                        x0 = mid;
                        f0 = fm;
                    }
                }
                out.push(0.5 * (x0 + x1));
            }
            a = b;
            fa = fb;
        }
        out
    }
}

/// Mean function `m(u, l) = base(u) + stratum_terms[l](u)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeanFunction {
    pub base: Polynomial,
    pub stratum_terms: BTreeMap<String, Polynomial>,
}

impl MeanFunction {
    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        Self {
            base: Polynomial(coefficients),
            stratum_terms: BTreeMap::new(),
        }
    }

    pub fn with_stratum_term(mut self, label: &str, coefficients: Vec<f64>) -> Self {
        self.stratum_terms.insert(label.to_string(), Polynomial(coefficients));
        self
    }

    fn resolve(&self, label: &str) -> Polynomial {
        match self.stratum_terms.get(label) {
            Some(extra) => self.base.add(extra),
            None => self.base.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSpec {
    pub m0: MeanFunction,
    pub m1: MeanFunction,
    pub noise_sd: f64,
    /// When set, `m_a` is `Pr(Y^a = 1)`.
    pub binary_mode: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlimSpec {
    pub threshold: ThresholdLaw,
    pub link: LinkForm,
    pub propensity: InstrumentPropensity,
    pub confounder: ConfounderLaw,
    /// `(stratum label, probability)`.
    pub covariate_law: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub glim: GlimSpec,
    pub outcome: OutcomeSpec,
}

/// Index of an L-stratum in a validated scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StratumId(pub usize);

/// Resolved parameters of one L-stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumModel {
    pub label: String,
    pub prob: f64,
    pub propensity: StratumPropensity,
    pub m0: Polynomial,
    pub m1: Polynomial,
}

impl StratumModel {
    pub fn mean(&self, arm: bool, u: f64) -> f64 {
        if arm {
            self.m1.eval(u)
        } else {
            self.m0.eval(u)
        }
    }
}

/// A scenario whose invariants have been checked by [`validate_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedScenario {
    spec: ScenarioSpec,
    strata: Vec<StratumModel>,
}

impl std::ops::Deref for ValidatedScenario {
    type Target = ScenarioSpec;
    fn deref(&self) -> &ScenarioSpec {
        &self.spec
    }
}

impl ValidatedScenario {
    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn into_spec(self) -> ScenarioSpec {
        self.spec
    }

    pub fn strata(&self) -> &[StratumModel] {
        &self.strata
    }

    pub fn stratum(&self, id: StratumId) -> &StratumModel {
        &self.strata[id.0]
    }

    pub fn stratum_id(&self, label: &str) -> Option<StratumId> {
        self.strata.iter().position(|s| s.label == label).map(StratumId)
    }

    pub fn stratum_ids(&self) -> impl Iterator<Item = StratumId> {
        (0..self.strata.len()).map(StratumId)
    }

    /// `h(z, u)` in stratum `l`.
    pub fn index(&self, z: bool, u: f64, l: StratumId) -> f64 {
        self.glim.link.apply(self.stratum(l).propensity.p(z), u)
    }

    /// Confounder values where some integrand in stratum `l` has a kink or
    /// jump caused by the threshold law or the link.
    pub fn threshold_breaks(&self, l: StratumId) -> Vec<f64> {
        let prop = self.stratum(l).propensity;
        let mut out = Vec::new();
        for z in [false, true] {
            for &k in self.glim.threshold.kinks() {
                out.extend(self.glim.link.solve(prop.p(z), k));
            }
        }
        if self.glim.link == LinkForm::Multiplicative {
            out.push(0.0);
        }
        out
    }

    /// Integration nodes for stratum `l`, split at threshold kinks and `extra`.
    pub fn confounder_nodes(&self, l: StratumId, extra: &[f64]) -> Vec<(f64, f64)> {
        let mut breaks = self.threshold_breaks(l);
        breaks.extend_from_slice(extra);
        self.glim.confounder.nodes(&breaks)
    }
}

/// Checks every scenario invariant and resolves per-stratum parameters.
pub fn validate_spec(spec: ScenarioSpec) -> Result<ValidatedScenario, ModelError> {
    let glim = &spec.glim;

    if glim.covariate_law.is_empty() {
        return Err(ModelError::InvalidCovariateLaw("no strata".into()));
    }
    let mut total = 0.0;
    for (i, (label, prob)) in glim.covariate_law.iter().enumerate() {
        if glim.covariate_law[..i].iter().any(|(l, _)| l == label) {
            return Err(ModelError::InvalidCovariateLaw(format!("duplicate stratum `{label}`")));
        }
        if !prob.is_finite() || *prob <= 0.0 {
            return Err(ModelError::InvalidCovariateLaw(format!(
                "stratum `{label}` has probability {prob}; must be positive"
            )));
        }
        total += prob;
    }
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(ModelError::InvalidCovariateLaw(format!(
            "probabilities sum to {total}, not 1"
        )));
    }

    match &glim.confounder {
        ConfounderLaw::Discrete(support) => {
            if support.is_empty() {
                return Err(ModelError::DegenerateConfounder("empty support".into()));
            }
            let mut total = 0.0;
            for &(u, p) in support {
                if !u.is_finite() || !p.is_finite() || p < 0.0 {
                    return Err(ModelError::DegenerateConfounder(format!(
                        "support point ({u}, {p}) must be finite with non-negative probability"
                    )));
                }
                total += p;
            }
            if (total - 1.0).abs() > PROB_SUM_TOL {
                return Err(ModelError::DegenerateConfounder(format!(
                    "probabilities sum to {total}, not 1"
                )));
            }
        }
        ConfounderLaw::UniformInterval { lo, hi } => {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(ModelError::DegenerateConfounder(format!(
                    "uniform bounds ({lo}, {hi}) need lo < hi"
                )));
            }
        }
    }

    if glim.threshold.kind == ThresholdKind::DegenerateOne
        && glim.threshold.coupling != Coupling::Common
    {
        return Err(ModelError::InconsistentThreshold(
            "degenerate_one thresholds are a single point mass; coupling must be `common`".into(),
        ));
    }

    if let InstrumentPropensity::PerStratum(map) = &glim.propensity {
        for label in map.keys() {
            if !glim.covariate_law.iter().any(|(l, _)| l == label) {
                return Err(ModelError::InvalidPropensity {
                    stratum: label.clone(),
                    detail: "stratum not present in covariate_law".into(),
                });
            }
        }
    }
    for (field, mean) in [("m0", &spec.outcome.m0), ("m1", &spec.outcome.m1)] {
        for label in mean.stratum_terms.keys() {
            if !glim.covariate_law.iter().any(|(l, _)| l == label) {
                return Err(ModelError::InvalidOutcome {
                    field: field.into(),
                    detail: format!("stratum term for unknown stratum `{label}`"),
                });
            }
        }
        let all = std::iter::once(&mean.base).chain(mean.stratum_terms.values());
        for poly in all {
            if poly.0.iter().any(|c| !c.is_finite()) {
                return Err(ModelError::InvalidOutcome {
                    field: field.into(),
                    detail: "coefficients must be finite".into(),
                });
            }
        }
    }
    let noise = spec.outcome.noise_sd;
    if !noise.is_finite() || noise < 0.0 {
        return Err(ModelError::InvalidOutcome {
            field: "noise_sd".into(),
            detail: format!("{noise} is not a non-negative finite number"),
        });
    }
    if spec.outcome.binary_mode && noise != 0.0 {
        return Err(ModelError::InvalidOutcome {
            field: "noise_sd".into(),
            detail: "binary_mode requires noise_sd = 0".into(),
        });
    }

    let mut strata = Vec::with_capacity(glim.covariate_law.len());
    for (label, prob) in &glim.covariate_law {
        let propensity =
            glim.propensity
                .for_stratum(label)
                .ok_or_else(|| ModelError::InvalidPropensity {
                    stratum: label.clone(),
                    detail: "no propensity given for this stratum".into(),
                })?;
        if !propensity.p0.is_finite() || !propensity.p1.is_finite() {
            return Err(ModelError::InvalidPropensity {
                stratum: label.clone(),
                detail: "p0 and p1 must be finite".into(),
            });
        }
        let q = propensity.assign_prob;
        if !(q > 0.0 && q < 1.0) {
            return Err(ModelError::InvalidPropensity {
                stratum: label.clone(),
                detail: format!("assign_prob {q} must lie strictly between 0 and 1"),
            });
        }
        strata.push(StratumModel {
            label: label.clone(),
            prob: *prob,
            propensity,
            m0: spec.outcome.m0.resolve(label),
            m1: spec.outcome.m1.resolve(label),
        });
    }

    let validated = ValidatedScenario { spec, strata };
    check_range(&validated)?;
    check_relevance(&validated)?;
    check_outcome_range(&validated)?;
    Ok(validated)
}

fn support_points(law: &ConfounderLaw) -> Vec<f64> {
    match law {
        ConfounderLaw::Discrete(s) => s.iter().map(|p| p.0).collect(),
        ConfounderLaw::UniformInterval { lo, hi } => vec![*lo, *hi],
    }
}

fn check_range(s: &ValidatedScenario) -> Result<(), ModelError> {
    let bounded = s.glim.link == LinkForm::Multiplicative
        || s.glim.threshold.kind == ThresholdKind::Uniform01;
    if !bounded {
        return Ok(());
    }
    // h is affine in u, so the extremes sit at the ends of the support.
    for l in s.stratum_ids() {
        for u in support_points(&s.glim.confounder) {
            for z in [false, true] {
                let h = s.index(z, u, l);
                if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&h) {
                    return Err(ModelError::RangeViolation {
                        stratum: s.stratum(l).label.clone(),
                        z: z as u8,
                        u,
                        value: h,
                    });
                }
            }
        }
    }
    Ok(())
}

fn check_relevance(s: &ValidatedScenario) -> Result<(), ModelError> {
    for l in s.stratum_ids() {
        let st = s.stratum(l);
        if (st.propensity.p1 - st.propensity.p0).abs() <= RELEVANCE_TOL {
            return Err(ModelError::RelevanceViolation {
                stratum: st.label.clone(),
                u: None,
            });
        }
        let nodes = s.confounder_nodes(l, &[]);
        if s.glim.threshold.kind == ThresholdKind::DegenerateOne {
            let first_stage: f64 = nodes
                .iter()
                .map(|&(u, w)| {
                    w * (potential_treatment_prob(s, true, u, l)
                        - potential_treatment_prob(s, false, u, l))
                })
                .sum();
            if first_stage.abs() <= RELEVANCE_TOL {
                return Err(ModelError::RelevanceViolation {
                    stratum: st.label.clone(),
                    u: None,
                });
            }
        } else {
            for &(u, _) in &nodes {
                let d = potential_treatment_prob(s, true, u, l)
                    - potential_treatment_prob(s, false, u, l);
                if d.abs() <= RELEVANCE_TOL {
                    return Err(ModelError::RelevanceViolation {
                        stratum: st.label.clone(),
                        u: Some(u),
                    });
                }
            }
        }
    }
    Ok(())
}

fn check_outcome_range(s: &ValidatedScenario) -> Result<(), ModelError> {
    if !s.outcome.binary_mode {
        return Ok(());
    }
    let grid: Vec<f64> = match &s.glim.confounder {
        ConfounderLaw::Discrete(sup) => sup.iter().map(|p| p.0).collect(),
        ConfounderLaw::UniformInterval { lo, hi } => {
            (0..=4096).map(|k| lo + (hi - lo) * k as f64 / 4096.0).collect()
        }
    };
    for st in s.strata() {
        for (field, arm) in [("m0", false), ("m1", true)] {
            for &u in &grid {
                let m = st.mean(arm, u);
                if !(0.0..=1.0).contains(&m) {
                    return Err(ModelError::InvalidOutcome {
                        field: field.into(),
                        detail: format!(
                            "binary_mode probability {m} outside [0, 1] at u = {u} in stratum `{}`",
                            st.label
                        ),
                    });
                }
            }
        }
    }
    Ok(())
}

/// `Pr(A^z = 1 | U = u, L = l) = Pr(ε_z ≤ h(z, u))`.
pub fn potential_treatment_prob(spec: &ValidatedScenario, z: bool, u: f64, l: StratumId) -> f64 {
    spec.glim.threshold.cdf(spec.index(z, u, l))
}

/// Compliance type, a function of `(A^{z=0}, A^{z=1})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplianceType {
    Nt,
    At,
    De,
    Co,
}

impl ComplianceType {
    pub fn from_potential(a0: bool, a1: bool) -> Self {
        match (a0, a1) {
            (false, false) => ComplianceType::Nt,
            (true, true) => ComplianceType::At,
            (true, false) => ComplianceType::De,
            (false, true) => ComplianceType::Co,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ComplianceType::Nt => "nt",
            ComplianceType::At => "at",
            ComplianceType::De => "de",
            ComplianceType::Co => "co",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nt" => Some(ComplianceType::Nt),
            "at" => Some(ComplianceType::At),
            "de" => Some(ComplianceType::De),
            "co" => Some(ComplianceType::Co),
            _ => None,
        }
    }

    pub fn is_nudgeable(self) -> bool {
        matches!(self, ComplianceType::De | ComplianceType::Co)
    }
}

/// Joint law of `(A^{z=0}, A^{z=1})` at one `(u, l)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplianceProbs {
    pub nt: f64,
    pub at: f64,
    pub de: f64,
    pub co: f64,
}

impl ComplianceProbs {
    /// `Pr(𝓝 = 1 | u, l)`.
    pub fn nudgeable(&self) -> f64 {
        self.co + self.de
    }

    /// `π(u, l)`, the complier share among nudge-able units; `None` when
    /// nobody is nudge-able.
    pub fn complier_share(&self) -> Option<f64> {
        let n = self.nudgeable();
        (n > 0.0).then(|| self.co / n)
    }

    pub fn get(&self, c: ComplianceType) -> f64 {
        match c {
            ComplianceType::Nt => self.nt,
            ComplianceType::At => self.at,
            ComplianceType::De => self.de,
            ComplianceType::Co => self.co,
        }
    }
}

/// Joint compliance probabilities at `(u, l)`. Independent thresholds give
/// the product of marginals; a common threshold places the single draw of
/// `ε` relative to `h(0, u)` and `h(1, u)`.
pub fn compliance_distribution(spec: &ValidatedScenario, u: f64, l: StratumId) -> ComplianceProbs {
    let f0 = potential_treatment_prob(spec, false, u, l);
    let f1 = potential_treatment_prob(spec, true, u, l);
    match spec.glim.threshold.coupling {
        Coupling::Independent => ComplianceProbs {
            nt: (1.0 - f0) * (1.0 - f1),
            at: f0 * f1,
            de: f0 * (1.0 - f1),
            co: (1.0 - f0) * f1,
        },
        Coupling::Common => ComplianceProbs {
            nt: 1.0 - f0.max(f1),
            at: f0.min(f1),
            de: (f0 - f1).max(0.0),
            co: (f1 - f0).max(0.0),
        },
    }
}

/// One unit's latent and potential variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelRow {
    pub u: f64,
    /// Index into [`CounterfactualPanel::strata`].
    pub l: u32,
    pub z: bool,
    pub a0: bool,
    pub a1: bool,
    pub y0: f64,
    pub y1: f64,
    pub ctype: ComplianceType,
    pub nudge: bool,
}

impl PanelRow {
    pub fn new(u: f64, l: u32, z: bool, a0: bool, a1: bool, y0: f64, y1: f64) -> Self {
        Self {
            u,
            l,
            z,
            a0,
            a1,
            y0,
            y1,
            ctype: ComplianceType::from_potential(a0, a1),
            nudge: a0 != a1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CounterfactualPanel {
    pub strata: Vec<String>,
    pub rows: Vec<PanelRow>,
}

impl PartialEq for CounterfactualPanel {
    fn eq(&self, other: &Self) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                self.strata[a.l as usize] == other.strata[b.l as usize]
                    && PanelRow { l: 0, ..*a } == PanelRow { l: 0, ..*b }
            })
    }
}

impl CounterfactualPanel {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn label(&self, row: &PanelRow) -> &str {
        &self.strata[row.l as usize]
    }
}

fn simulate_row(spec: &ValidatedScenario, seed: u64, index: u64) -> PanelRow {
    let mut rng = rng::stream(seed, Domain::Simulation, index);
    let draw: f64 = rng.random();
    let mut acc = 0.0;
    let mut l = spec.strata().len() - 1;
    for (i, st) in spec.strata().iter().enumerate() {
        acc += st.prob;
        if draw < acc {
            l = i;
            break;
        }
    }
    let id = StratumId(l);
    let u = spec.glim.confounder.sample(&mut rng);
    let threshold = spec.glim.threshold;
    let (e0, e1) = match threshold.coupling {
        Coupling::Independent => (threshold.sample(&mut rng), threshold.sample(&mut rng)),
        Coupling::Common => {
            let e = threshold.sample(&mut rng);
            (e, e)
        }
    };
    let a0 = spec.index(false, u, id) >= e0;
    let a1 = spec.index(true, u, id) >= e1;
    let st = spec.stratum(id);
    let z = rng.random::<f64>() < st.propensity.assign_prob;
    let (m0, m1) = (st.m0.eval(u), st.m1.eval(u));
    let (y0, y1) = if spec.outcome.binary_mode {
        let v: f64 = rng.random();
        ((v < m0) as u8 as f64, (v < m1) as u8 as f64)
    } else {
        let e: f64 = rng.sample(StandardNormal);
        let sd = spec.outcome.noise_sd;
        (m0 + sd * e, m1 + sd * e)
    };
    PanelRow::new(u, l as u32, z, a0, a1, y0, y1)
}

/// Draws `n` i.i.d. units. Row `i` uses its own random stream derived from
/// `(seed, i)`, so the panel does not depend on the worker count.
pub fn simulate_panel(
    spec: &ValidatedScenario,
    n: usize,
    seed: u64,
) -> Result<CounterfactualPanel, ModelError> {
    if n == 0 {
        return Err(ModelError::EmptyPanel);
    }
    let rows = (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_row(spec, seed, i))
        .collect();
    Ok(CounterfactualPanel {
        strata: spec.strata().iter().map(|s| s.label.clone()).collect(),
        rows,
    })
}

/// Applies the consistency identities `A = Z·A¹ + (1−Z)·A⁰` and
/// `Y = A·Y¹ + (1−A)·Y⁰`, dropping latent columns. The dataset has a single
/// covariate column `l`.
pub fn observe(panel: &CounterfactualPanel) -> Result<ObservedDataset, ModelError> {
    if panel.is_empty() {
        return Err(ModelError::EmptyPanel);
    }
    let rows = panel
        .rows
        .iter()
        .map(|r| {
            let a = if r.z { r.a1 } else { r.a0 };
            Observation {
                z: r.z,
                a,
                y: if a { r.y1 } else { r.y0 },
                stratum: r.l,
            }
        })
        .collect();
    let strata = panel.strata.iter().map(|s| vec![s.clone()]).collect();
    ObservedDataset::new(vec!["l".into()], strata, rows).map_err(|_| ModelError::EmptyPanel)
}
