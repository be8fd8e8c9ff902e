mod common;

use common::{expit, poly_integral, poly_mul, valid};
use nudge_iv::functional::Functional;
use nudge_iv::glim::{compliance_distribution, potential_treatment_prob, StratumId};
use nudge_iv::oracle::{
    check_conditions, counterfactual_functional, exact_arm_wald, exact_wald, identification_gap,
    potential_treatment_shares, true_target, CausalTarget, Conditioning, Subgroup, TargetKind,
};
use nudge_iv::scenarios;

const M: Conditioning = Conditioning::Marginal;

fn target(kind: TargetKind) -> CausalTarget {
    CausalTarget::marginal(kind)
}

#[test]
fn monotone_targets_in_closed_form() {
    let s1 = valid(scenarios::s1_monotone());
    // compliers: U in [1 - p1, 1 - p0) = [0.4, 0.7); effect 1 + u
    let late = poly_integral(&[1.0, 1.0], 0.4, 0.7) / 0.3;
    assert!((late - 1.55).abs() < 1e-12);
    assert!((true_target(&s1, &target(TargetKind::Late)).unwrap() - late).abs() < 1e-12);
    assert!((true_target(&s1, &target(TargetKind::Nate)).unwrap() - late).abs() < 1e-12);

    // Pr(A = 1 | u) = 0.5 on [0.4, 0.7) and 1 on [0.7, 1]
    let att = (0.5 * poly_integral(&[1.0, 1.0], 0.4, 0.7) + poly_integral(&[1.0, 1.0], 0.7, 1.0)) / 0.45;
    assert!((true_target(&s1, &target(TargetKind::Att)).unwrap() - att).abs() < 1e-12);
    assert!((true_target(&s1, &target(TargetKind::Ate)).unwrap() - 1.5).abs() < 1e-12);
    assert!(identification_gap(&s1, &target(TargetKind::Late)).unwrap() <= 1e-10);
}

#[test]
fn logistic_nate_by_enumeration() {
    let s2 = valid(scenarios::s2_logistic());
    let (mut num, mut den) = (0.0, 0.0);
    for u in [-1.0, 1.0] {
        let (p0, p1) = (expit(u), expit(1.0 + u));
        let nudge = p0 * (1.0 - p1) + p1 * (1.0 - p0);
        num += 0.5 * nudge * (1.0 + u);
        den += 0.5 * nudge;
    }
    let nate = true_target(&s2, &target(TargetKind::Nate)).unwrap();
    assert!((nate - num / den).abs() < 1e-14, "{nate}");
    assert!((exact_wald(&s2, &M).unwrap() - nate).abs() < 1e-10);
    assert!(identification_gap(&s2, &target(TargetKind::Nate)).unwrap() <= 1e-10);
}

#[test]
fn additive_uniform_targets_by_polynomial_integration() {
    let s3 = valid(scenarios::s3_additive());
    // P0 = 0.2 + u, P1 = 0.5 + u, U ~ Uniform(0, 0.5)
    let p0 = [0.2, 1.0];
    let p1 = [0.5, 1.0];
    let one_minus = |p: &[f64; 2]| [1.0 - p[0], -p[1]];
    let nudge: Vec<f64> = poly_mul(&p0, &one_minus(&p1))
        .iter()
        .zip(poly_mul(&p1, &one_minus(&p0)))
        .map(|(a, b)| a + b)
        .collect();
    let effect = [1.0, 2.0];
    let nate = poly_integral(&poly_mul(&effect, &nudge), 0.0, 0.5) / poly_integral(&nudge, 0.0, 0.5);
    let got = true_target(&s3, &target(TargetKind::Nate)).unwrap();
    assert!((got - nate).abs() < 1e-12, "{got} vs {nate}");
    assert!((true_target(&s3, &target(TargetKind::Ate)).unwrap() - 1.5).abs() < 1e-12);
    assert!((exact_wald(&s3, &M).unwrap() - 1.5).abs() < 1e-10);
    assert!(identification_gap(&s3, &target(TargetKind::Nate)).unwrap() > 0.01);
    assert!(check_conditions(&s3, &M).unwrap().null_cov.abs() > 1e-4);
}

#[test]
fn multiplicative_shares_and_treated_mean() {
    let s4 = valid(scenarios::s4_multiplicative());
    let r = check_conditions(&s4, &M).unwrap();
    // co = ∫ 0.8u(1 - 0.4u), de = ∫ 0.4u(1 - 0.8u) over [0, 1]
    assert!((r.complier_share - (0.4 - 0.32 / 3.0)).abs() < 1e-12);
    assert!((r.defier_share - (0.2 - 0.32 / 3.0)).abs() < 1e-12);
    let mu = exact_arm_wald(&s4, false, &Functional::Identity, &M).unwrap();
    assert!((mu - 2.0 / 3.0).abs() < 1e-10);
}

#[test]
fn treatment_probability_examples() {
    let s2 = valid(scenarios::s2_logistic());
    let l = StratumId(0);
    assert!((potential_treatment_prob(&s2, true, 0.0, l) - 0.7310585786300049).abs() < 1e-15);
    let c = compliance_distribution(&s2, -1.0, l);
    assert!((c.co - 0.5 * expit(1.0)).abs() < 1e-15);
    assert!((c.co - 0.36553).abs() < 1e-5);

    let s1 = valid(scenarios::s1_monotone());
    assert_eq!(potential_treatment_prob(&s1, true, 0.5, l), 1.0);
    for u in [0.0, 0.35, 0.4, 0.55, 0.7, 0.99] {
        assert_eq!(compliance_distribution(&s1, u, l).de, 0.0);
    }
    let s3 = valid(scenarios::s3_additive());
    assert!((potential_treatment_prob(&s3, false, 0.3, l) - 0.5).abs() < 1e-15);
}

#[test]
fn compliance_distribution_is_coherent() {
    for spec in scenarios::all() {
        let s = valid(spec);
        for l in s.stratum_ids() {
            for (u, _) in s.confounder_nodes(l, &[]) {
                let c = compliance_distribution(&s, u, l);
                let parts = [c.nt, c.at, c.de, c.co];
                assert!(parts.iter().all(|p| (0.0..=1.0).contains(p)));
                assert!((parts.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                assert!((c.at + c.co - potential_treatment_prob(&s, true, u, l)).abs() <= 1e-12);
                assert!((c.at + c.de - potential_treatment_prob(&s, false, u, l)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn logistic_complier_share_is_constant() {
    for spec in [scenarios::s2_logistic(), scenarios::s5_two_strata(), scenarios::s6_binary_logistic()] {
        let s = valid(spec);
        for l in s.stratum_ids() {
            let p = s.stratum(l).propensity;
            for (u, pi) in nudge_iv::oracle::complier_share_profile(&s, l) {
                assert!((pi - expit(p.p1 - p.p0)).abs() <= 1e-12, "u = {u}");
            }
        }
    }
}

#[test]
fn share_difference_equals_first_stage() {
    for spec in scenarios::all() {
        let s = valid(spec);
        let r = check_conditions(&s, &M).unwrap();
        let (pi0, pi1) = potential_treatment_shares(&s, &M).unwrap();
        assert!((r.complier_share - r.defier_share - (pi1 - pi0)).abs() <= 1e-12, "{}", s.name);
        assert!((r.complier_share + r.defier_share - r.nudge_share).abs() <= 1e-12);
    }
}

#[test]
fn arm_ratios_recover_nudgeable_functionals_under_balanced_shares() {
    let cases: Vec<(_, Vec<Conditioning>)> = vec![
        (scenarios::s1_monotone(), vec![M]),
        (scenarios::s2_logistic(), vec![M]),
        (scenarios::s6_binary_logistic(), vec![M]),
        (
            scenarios::s5_two_strata(),
            vec![Conditioning::Stratum("a".into()), Conditioning::Stratum("b".into())],
        ),
    ];
    for (spec, conds) in cases {
        let s = valid(spec);
        for cond in conds {
            assert!(check_conditions(&s, &cond).unwrap().bcs_max_dev <= 1e-12);
            let mut hs = vec![Functional::Identity, Functional::Square];
            hs.extend([-0.5, 0.25, 0.5, 1.5, 2.5].map(|c| Functional::IndicatorLeq { c }));
            for h in &hs {
                for arm in [false, true] {
                    let identified = exact_arm_wald(&s, arm, h, &cond).unwrap();
                    let truth = counterfactual_functional(&s, arm, h, Subgroup::Nudgeable, &cond).unwrap();
                    assert!(
                        (identified - truth).abs() <= 1e-9,
                        "{} {cond:?} a={arm} h={h}: {identified} vs {truth}",
                        s.name
                    );
                }
            }
        }
    }
}

#[test]
fn per_stratum_wald_identifies_per_stratum_nate() {
    let s5 = valid(scenarios::s5_two_strata());
    for label in ["a", "b"] {
        let t = CausalTarget::in_stratum(TargetKind::Nate, label);
        assert!(identification_gap(&s5, &t).unwrap() <= 1e-12);
    }
}
