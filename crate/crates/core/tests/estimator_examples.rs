mod common;

use common::{boot_se, observed, valid};
use nudge_iv::estimators::{
    arm_wald, effect_contrast, first_stage_diagnostics, frechet_bounds, median_nte, wald_conditional,
    wald_marginal, EstimationError,
};
use nudge_iv::functional::Functional;
use nudge_iv::oracle::{
    check_conditions, exact_arm_wald, exact_wald, true_target, CausalTarget, Conditioning, Scale, Subgroup,
    TargetKind,
};
use nudge_iv::{scenarios, ObservedDataset};

const N: usize = 200_000;
const M: Conditioning = Conditioning::Marginal;

fn within(label: &str, est: f64, truth: f64, se: f64, k: f64) {
    assert!(se.is_finite() && se > 0.0, "{label}: se = {se}");
    let z = (est - truth) / se;
    assert!(z.abs() <= k, "{label}: estimate {est}, truth {truth}, se {se}, z {z:.2}");
}

#[test]
fn logistic_wald_matches_exact_wald() {
    let s2 = valid(scenarios::s2_logistic());
    let d = observed(&s2, N, 11);
    let est = wald_marginal(&d).unwrap().point;
    let se = boot_se(&d, |d| wald_marginal(d).map(|r| r.point), 200, 12);
    within("s2 wald", est, exact_wald(&s2, &M).unwrap(), se, 5.0);
}

#[test]
fn two_strata_per_stratum_points() {
    let s5 = valid(scenarios::s5_two_strata());
    let d = observed(&s5, N, 21);
    let v = vec!["l".to_string()];
    let report = wald_conditional(&d, &v).unwrap();
    for label in ["a", "b"] {
        let est = report.per_stratum[label].point.unwrap();
        let se = boot_se(
            &d,
            |d| {
                wald_conditional(d, &v)?.per_stratum[label]
                    .point
                    .ok_or(EstimationError::UnknownCovariate(label.into()))
            },
            200,
            22,
        );
        let truth = exact_wald(&s5, &Conditioning::Stratum(label.into())).unwrap();
        within(&format!("s5 stratum {label}"), est, truth, se, 5.0);
    }
}

#[test]
fn multiplicative_untreated_mean_among_treated() {
    let s4 = valid(scenarios::s4_multiplicative());
    let d = observed(&s4, N, 31);
    let est = arm_wald(&d, false, &Functional::Identity, &[]).unwrap().point;
    let se = boot_se(&d, |d| arm_wald(d, false, &Functional::Identity, &[]).map(|r| r.point), 200, 32);
    let truth = true_target(
        &s4,
        &CausalTarget::marginal(TargetKind::Mean { arm: false, group: Subgroup::Treated }),
    )
    .unwrap();
    assert!((truth - 2.0 / 3.0).abs() < 1e-9);
    assert!((exact_arm_wald(&s4, false, &Functional::Identity, &M).unwrap() - truth).abs() < 1e-9);
    within("s4 arm wald", est, truth, se, 5.0);
}

#[test]
fn binary_logistic_odds_ratio() {
    let s6 = valid(scenarios::s6_binary_logistic());
    let d = observed(&s6, N, 41);
    let est = effect_contrast(&d, Scale::OddsRatio, &[]).unwrap().point;
    let se = boot_se(&d, |d| effect_contrast(d, Scale::OddsRatio, &[]).map(|r| r.point), 200, 42);
    let truth = true_target(
        &s6,
        &CausalTarget::marginal(TargetKind::Contrast { scale: Scale::OddsRatio, group: Subgroup::Nudgeable }),
    )
    .unwrap();
    within("s6 odds ratio", est, truth, se, 5.0);
}

#[test]
fn continuous_outcome_rejects_odds_ratio() {
    let d = observed(&valid(scenarios::s2_logistic()), 500, 1);
    assert!(matches!(
        effect_contrast(&d, Scale::OddsRatio, &[]),
        Err(EstimationError::InvalidScale(_))
    ));
}

#[test]
fn noise_free_median_contrast() {
    let s = valid(scenarios::s1_noise_free());
    let truth = true_target(
        &s,
        &CausalTarget::marginal(TargetKind::QuantileContrast { q: 0.5, group: Subgroup::Nudgeable }),
    )
    .unwrap();
    // compliers have U ~ Uniform[0.4, 0.7); Y^1 = 1 + 2u, Y^0 = u
    assert!((truth - (2.1 - 0.55)).abs() < 1e-9, "{truth}");
    let d = observed(&s, N, 51);
    let est = median_nte(&d, &[]).unwrap().point;
    let se = boot_se(&d, |d| median_nte(d, &[]).map(|r| r.point), 100, 52);
    within("noise-free median", est, truth, se, 5.0);
}

#[test]
fn location_shift_median_tracks_mean_effect() {
    let s7 = valid(scenarios::s7_location_shift());
    let d = observed(&s7, N, 61);
    let med = median_nte(&d, &[]).unwrap().point;
    let wald = wald_marginal(&d).unwrap().point;
    let se = boot_se(
        &d,
        |d| Ok::<_, EstimationError>(median_nte(d, &[])?.point - wald_marginal(d)?.point),
        100,
        62,
    );
    within("location shift", med - wald, 0.0, se, 5.0);
    let tau = true_target(&s7, &CausalTarget::marginal(TargetKind::Nate)).unwrap();
    assert!((tau - 1.5).abs() < 1e-9);
}

#[test]
fn constant_outcome_has_no_sign_change() {
    let d = ObservedDataset::without_covariates((0..40).map(|i| (i % 2 == 0, i % 4 == 0 || i % 5 == 0, 2.0))).unwrap();
    assert!(matches!(median_nte(&d, &[]), Err(EstimationError::NoSignChange { .. })));
}

#[test]
fn monotone_first_stage_and_complier_bound() {
    let s1 = valid(scenarios::s1_monotone());
    let d = observed(&s1, N, 71);
    let fs = &first_stage_diagnostics(&d, &[]).unwrap()[""];
    let se = boot_se(&d, |d| wald_marginal(d).map(|r| r.first_stage), 200, 72);
    within("s1 first stage", fs.denominator.unwrap(), 0.3, se, 5.0);

    let co = check_conditions(&s1, &M).unwrap().complier_share;
    assert!((co - 0.3).abs() < 1e-12);
    let lo = frechet_bounds(&d, &[]).unwrap().marginal.complier_lo;
    within("s1 complier bound", lo, co, se, 5.0);
}
