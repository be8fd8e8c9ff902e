//! Reference scenarios, one per selection-model row plus a few variants
//! used by the test suites. The same scenarios ship as JSON under
//! `fixtures/`.

use std::collections::BTreeMap;

use crate::glim::{
    ConfounderLaw, Coupling, GlimSpec, InstrumentPropensity, LinkForm, MeanFunction,
    OutcomeSpec, ScenarioSpec, StratumPropensity, ThresholdLaw,
};

fn single_stratum() -> Vec<(String, f64)> {
    vec![("all".to_string(), 1.0)]
}

fn shared(p0: f64, p1: f64) -> InstrumentPropensity {
    InstrumentPropensity::Shared(StratumPropensity {
        p0,
        p1,
        assign_prob: 0.5,
    })
}

fn outcome(m0: Vec<f64>, m1: Vec<f64>, noise_sd: f64) -> OutcomeSpec {
    OutcomeSpec {
        m0: MeanFunction::polynomial(m0),
        m1: MeanFunction::polynomial(m1),
        noise_sd,
        binary_mode: false,
    }
}

/// S1: monotone latent index model, `ε₀ = ε₁ = 1`, `U ~ Uniform(0, 1)`.
pub fn s1_monotone() -> ScenarioSpec {
    ScenarioSpec {
        name: "s1_monotone".into(),
        glim: GlimSpec {
            threshold: ThresholdLaw::degenerate(),
            link: LinkForm::Additive,
            propensity: shared(0.3, 0.6),
            confounder: ConfounderLaw::UniformInterval { lo: 0.0, hi: 1.0 },
            covariate_law: single_stratum(),
        },
        outcome: outcome(vec![0.0, 1.0], vec![1.0, 2.0], 0.5),
    }
}

/// S1 without outcome noise.
pub fn s1_noise_free() -> ScenarioSpec {
    let mut s = s1_monotone();
    s.name = "s1_noise_free".into();
    s.outcome.noise_sd = 0.0;
    s
}

/// S2: logistic thresholds with independent coupling and `U ∈ {−1, +1}`.
pub fn s2_logistic() -> ScenarioSpec {
    ScenarioSpec {
        name: "s2_logistic".into(),
        glim: GlimSpec {
            threshold: ThresholdLaw::logistic(Coupling::Independent),
            link: LinkForm::Additive,
            propensity: shared(0.0, 1.0),
            confounder: ConfounderLaw::Discrete(vec![(-1.0, 0.5), (1.0, 0.5)]),
            covariate_law: single_stratum(),
        },
        outcome: outcome(vec![0.0, 1.0], vec![1.0, 2.0], 0.5),
    }
}

/// S3: additive link with uniform thresholds; the effect `1 + 2u` varies
/// with `U` and so does the complier share, so the null-covariance
/// condition fails.
pub fn s3_additive() -> ScenarioSpec {
    ScenarioSpec {
        name: "s3_additive".into(),
        glim: GlimSpec {
            threshold: ThresholdLaw::uniform(Coupling::Independent),
            link: LinkForm::Additive,
            propensity: shared(0.2, 0.5),
            confounder: ConfounderLaw::UniformInterval { lo: 0.0, hi: 0.5 },
            covariate_law: single_stratum(),
        },
        outcome: outcome(vec![0.0, 1.0], vec![1.0, 3.0], 0.5),
    }
}

/// S4: multiplicative link with uniform thresholds.
pub fn s4_multiplicative() -> ScenarioSpec {
    ScenarioSpec {
        name: "s4_multiplicative".into(),
        glim: GlimSpec {
            threshold: ThresholdLaw::uniform(Coupling::Independent),
            link: LinkForm::Multiplicative,
            propensity: shared(0.4, 0.8),
            confounder: ConfounderLaw::UniformInterval { lo: 0.0, hi: 1.0 },
            covariate_law: single_stratum(),
        },
        outcome: outcome(vec![0.0, 1.0], vec![1.0, 2.0], 0.5),
    }
}

/// Two L-strata with stratum-specific `p(z)`, assignment probabilities and
/// outcome shifts under logistic thresholds.
pub fn s5_two_strata() -> ScenarioSpec {
    let mut per = BTreeMap::new();
    per.insert(
        "a".to_string(),
        StratumPropensity {
            p0: -1.0,
            p1: 1.0,
            assign_prob: 0.5,
        },
    );
    per.insert(
        "b".to_string(),
        StratumPropensity {
            p0: 0.0,
            p1: 0.8,
            assign_prob: 0.3,
        },
    );
    ScenarioSpec {
        name: "s5_two_strata".into(),
        glim: GlimSpec {
            threshold: ThresholdLaw::logistic(Coupling::Independent),
            link: LinkForm::Additive,
            propensity: InstrumentPropensity::PerStratum(per),
            confounder: ConfounderLaw::Discrete(vec![(-1.0, 0.3), (0.0, 0.4), (1.0, 0.3)]),
            covariate_law: vec![("a".to_string(), 0.4), ("b".to_string(), 0.6)],
        },
        outcome: OutcomeSpec {
            m0: MeanFunction::polynomial(vec![0.0, 1.0]).with_stratum_term("b", vec![0.5]),
            m1: MeanFunction::polynomial(vec![1.0, 2.0]).with_stratum_term("b", vec![1.0, 1.0]),
            noise_sd: 0.5,
            binary_mode: false,
        },
    }
}

/// Logistic selection with a binary outcome.
pub fn s6_binary_logistic() -> ScenarioSpec {
    ScenarioSpec {
        name: "s6_binary_logistic".into(),
        glim: GlimSpec {
            threshold: ThresholdLaw::logistic(Coupling::Independent),
            link: LinkForm::Additive,
            propensity: shared(-0.5, 1.0),
            confounder: ConfounderLaw::Discrete(vec![(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]),
            covariate_law: single_stratum(),
        },
        outcome: OutcomeSpec {
            m0: MeanFunction::polynomial(vec![0.3, 0.1]),
            m1: MeanFunction::polynomial(vec![0.6, 0.15]),
            noise_sd: 0.0,
            binary_mode: true,
        },
    }
}

/// Monotone selection with a pure location shift `m1 = m0 + 1.5` and
/// symmetric noise, so mean and median effects coincide.
pub fn s7_location_shift() -> ScenarioSpec {
    let mut s = s1_monotone();
    s.name = "s7_location_shift".into();
    s.outcome = outcome(vec![0.0, 1.0], vec![1.5, 1.0], 0.5);
    s
}

/// Every shipped scenario with its fixture file stem.
pub fn all() -> Vec<ScenarioSpec> {
    vec![
        s1_monotone(),
        s1_noise_free(),
        s2_logistic(),
        s3_additive(),
        s4_multiplicative(),
        s5_two_strata(),
        s6_binary_logistic(),
        s7_location_shift(),
    ]
}
