use std::fs;
use std::path::PathBuf;

use nudge_iv::glim::ModelError;
use nudge_iv::io::{self, IoError};
use nudge_iv::scenarios;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

#[test]
fn shipped_fixtures_match_built_in_scenarios() {
    for spec in scenarios::all() {
        let loaded = io::load_scenario(fixture(&format!("{}.json", spec.name))).unwrap();
        assert_eq!(loaded.spec(), &spec);
    }
}

#[test]
fn misspelled_link_names_the_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = fs::read_to_string(fixture("s1_monotone.json")).unwrap();
    fs::write(&path, text.replace("\"additive\"", "\"addittive\"")).unwrap();
    let err = io::load_scenario(&path).unwrap_err();
    assert!(matches!(err, IoError::Schema { .. }), "{err}");
    assert!(err.to_string().contains("addittive") && err.to_string().contains("glim.link"));
}

#[test]
fn equal_propensities_surface_relevance_violation_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.json");
    let text = fs::read_to_string(fixture("s2_logistic.json")).unwrap();
    fs::write(&path, text.replace("\"p1\": 1.0", "\"p1\": 0.0")).unwrap();
    match io::load_scenario(&path).unwrap_err() {
        IoError::Invalid { json_path, source, .. } => {
            assert_eq!(json_path, "glim.propensity");
            assert!(matches!(source, ModelError::RelevanceViolation { .. }));
        }
        e => panic!("{e}"),
    }
}

#[test]
fn report_contains_required_keys() {
    let data = nudge_iv::ObservedDataset::without_covariates(vec![
        (true, true, 2.0),
        (true, false, 1.0),
        (false, false, 0.0),
        (false, false, 0.5),
    ])
    .unwrap();
    let report = nudge_iv::estimators::wald_marginal(&data).unwrap();
    let value: serde_json::Value = serde_json::from_str(&io::report_to_string(&report)).unwrap();
    for key in ["schema_version", "estimand", "point", "first_stage", "n", "warnings"] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
}
