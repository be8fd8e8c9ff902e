//! File formats: scenario documents and reports as JSON, datasets and
//! counterfactual panels as comma-separated values with a header row.
//!
//! Every JSON document carries `"schema_version": 1`. CSV floats are written
//! with 17 significant digits, so values round-trip exactly.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, ObservedDataset};
use crate::glim::{
    validate_spec, ComplianceType, ConfounderLaw, CounterfactualPanel, GlimSpec,
    InstrumentPropensity, LinkForm, MeanFunction, ModelError, OutcomeSpec, PanelRow,
    Polynomial, ScenarioSpec, StratumPropensity, ThresholdLaw, ValidatedScenario,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const PANEL_HEADER: [&str; 9] = ["u", "l", "z", "a0", "a1", "y0", "y1", "ctype", "nudge"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: at `{json_path}`: {message}")]
    Schema {
        path: PathBuf,
        json_path: String,
        message: String,
    },
    #[error("{path}: at `{json_path}`: {source}")]
    Invalid {
        path: PathBuf,
        json_path: String,
        #[source]
        source: ModelError,
    },
    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}:{line}: column `{column}`: {message}")]
    Domain {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Data {
        path: PathBuf,
        #[source]
        source: DataError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Renders `x` like C's `%.17g`.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let strip = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip(mantissa), exp.abs())
    } else {
        strip(&format!("{x:.*}", (16 - exp) as usize))
    }
}

// ---------------------------------------------------------------------------
// Scenario documents

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDocument {
    schema_version: u32,
    name: String,
    glim: GlimDocument,
    outcome: OutcomeDocument,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GlimDocument {
    threshold: ThresholdLaw,
    link: LinkForm,
    propensity: PropensityDocument,
    confounder: ConfounderDocument,
    covariate_law: Vec<StratumWeight>,
}

/// Either `p0`, `p1` and `assign_prob` shared by all strata, or a
/// `per_stratum` map of them.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropensityDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    assign_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    per_stratum: Option<BTreeMap<String, StratumPropensity>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ConfounderDocument {
    Discrete { support: Vec<(f64, f64)> },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StratumWeight {
    label: String,
    prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeanDocument {
    base: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    stratum_terms: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeDocument {
    m0: MeanDocument,
    m1: MeanDocument,
    noise_sd: f64,
    #[serde(default)]
    binary_mode: bool,
}

impl From<&MeanFunction> for MeanDocument {
    fn from(m: &MeanFunction) -> Self {
        Self {
            base: m.base.0.clone(),
            stratum_terms: m
                .stratum_terms
                .iter()
                .map(|(k, v)| (k.clone(), v.0.clone()))
                .collect(),
        }
    }
}

impl From<MeanDocument> for MeanFunction {
    fn from(d: MeanDocument) -> Self {
        MeanFunction {
            base: Polynomial(d.base),
            stratum_terms: d
                .stratum_terms
                .into_iter()
                .map(|(k, v)| (k, Polynomial(v)))
                .collect(),
        }
    }
}

impl From<&ScenarioSpec> for ScenarioDocument {
    fn from(s: &ScenarioSpec) -> Self {
        let propensity = match &s.glim.propensity {
            InstrumentPropensity::Shared(p) => PropensityDocument {
                p0: Some(p.p0),
                p1: Some(p.p1),
                assign_prob: Some(p.assign_prob),
                per_stratum: None,
            },
            InstrumentPropensity::PerStratum(m) => PropensityDocument {
                per_stratum: Some(m.clone()),
                ..Default::default()
            },
        };
        let confounder = match &s.glim.confounder {
            ConfounderLaw::Discrete(support) => ConfounderDocument::Discrete {
                support: support.clone(),
            },
            ConfounderLaw::UniformInterval { lo, hi } => ConfounderDocument::Uniform { lo: *lo, hi: *hi },
        };
        ScenarioDocument {
            schema_version: SCHEMA_VERSION,
            name: s.name.clone(),
            glim: GlimDocument {
                threshold: s.glim.threshold,
                link: s.glim.link,
                propensity,
                confounder,
                covariate_law: s
                    .glim
                    .covariate_law
                    .iter()
                    .map(|(label, prob)| StratumWeight {
                        label: label.clone(),
                        prob: *prob,
                    })
                    .collect(),
            },
            outcome: OutcomeDocument {
                m0: (&s.outcome.m0).into(),
                m1: (&s.outcome.m1).into(),
                noise_sd: s.outcome.noise_sd,
                binary_mode: s.outcome.binary_mode,
            },
        }
    }
}

impl ScenarioDocument {
    fn into_spec(self, path: &Path) -> Result<ScenarioSpec, IoError> {
        let schema = |json_path: &str, message: String| IoError::Schema {
            path: path.to_path_buf(),
            json_path: json_path.to_string(),
            message,
        };
        if self.schema_version != SCHEMA_VERSION {
            return Err(schema(
                "schema_version",
                format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let p = self.glim.propensity;
        let propensity = match (p.p0, p.p1, p.assign_prob, p.per_stratum) {
            (Some(p0), Some(p1), Some(assign_prob), None) => {
                InstrumentPropensity::Shared(StratumPropensity { p0, p1, assign_prob })
            }
            (None, None, None, Some(map)) => InstrumentPropensity::PerStratum(map),
            _ => {
                return Err(schema(
                    "glim.propensity",
                    "expected either p0, p1 and assign_prob, or per_stratum alone".into(),
                ))
            }
        };
        let confounder = match self.glim.confounder {
            ConfounderDocument::Discrete { support } => ConfounderLaw::Discrete(support),
            ConfounderDocument::Uniform { lo, hi } => ConfounderLaw::UniformInterval { lo, hi },
        };
        Ok(ScenarioSpec {
            name: self.name,
            glim: GlimSpec {
                threshold: self.glim.threshold,
                link: self.glim.link,
                propensity,
                confounder,
                covariate_law: self
                    .glim
                    .covariate_law
                    .into_iter()
                    .map(|w| (w.label, w.prob))
                    .collect(),
            },
            outcome: OutcomeSpec {
                m0: self.outcome.m0.into(),
                m1: self.outcome.m1.into(),
                noise_sd: self.outcome.noise_sd,
                binary_mode: self.outcome.binary_mode,
            },
        })
    }
}

/// Parses a scenario document without validating the model.
pub fn parse_scenario(text: &str, path: &Path) -> Result<ScenarioSpec, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ScenarioDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let json_path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => IoError::Schema {
                path: path.to_path_buf(),
                json_path,
                message: inner.to_string(),
            },
            _ => IoError::Parse {
                path: path.to_path_buf(),
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            },
        }
    })?;
    doc.into_spec(path)
}

/// Reads, parses and validates a scenario document.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ValidatedScenario, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let spec = parse_scenario(&text, path)?;
    validate_spec(spec).map_err(|source| IoError::Invalid {
        path: path.to_path_buf(),
        json_path: source.json_path(),
        source,
    })
}

pub fn scenario_to_string(spec: &ScenarioSpec) -> String {
    let mut s = serde_json::to_string_pretty(&ScenarioDocument::from(spec)).expect("scenario serializes");
    s.push('\n');
    s
}

pub fn write_scenario(spec: &ScenarioSpec, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, scenario_to_string(spec)).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty-printed JSON with a leading `schema_version`.
pub fn report_to_string<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        body: report,
    })
    .expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report<T: Serialize>(report: &T, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, report_to_string(report)).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// Datasets

/// Column names of an observed-data CSV. `covariates: None` treats every
/// other column as a categorical covariate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSchema {
    pub z: String,
    pub a: String,
    pub y: String,
    pub covariates: Option<Vec<String>>,
}

impl Default for DatasetSchema {
    fn default() -> Self {
        Self {
            z: "z".into(),
            a: "a".into(),
            y: "y".into(),
            covariates: None,
        }
    }
}

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IoError::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => IoError::Csv {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn open_csv(path: &Path) -> Result<(csv::Reader<fs::File>, Vec<String>), IoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    Ok((reader, header))
}

fn column(path: &Path, header: &[String], name: &str) -> Result<usize, IoError> {
    header.iter().position(|h| h == name).ok_or_else(|| IoError::Csv {
        path: path.to_path_buf(),
        line: 1,
        message: format!("column `{name}` not in header [{}]", header.join(",")),
    })
}

struct Field<'a> {
    path: &'a Path,
    line: u64,
}

impl Field<'_> {
    fn domain(&self, column: &str, message: String) -> IoError {
        IoError::Domain {
            path: self.path.to_path_buf(),
            line: self.line,
            column: column.to_string(),
            message,
        }
    }

    fn bit(&self, column: &str, value: &str) -> Result<bool, IoError> {
        match value {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(self.domain(column, format!("`{other}` is not 0 or 1"))),
        }
    }

    fn real(&self, column: &str, value: &str) -> Result<f64, IoError> {
        value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.domain(column, format!("`{value}` is not a finite number")))
    }
}

pub fn read_dataset(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<ObservedDataset, IoError> {
    let path = path.as_ref();
    let (mut reader, header) = open_csv(path)?;
    let (iz, ia, iy) = (
        column(path, &header, &schema.z)?,
        column(path, &header, &schema.a)?,
        column(path, &header, &schema.y)?,
    );
    let covariates: Vec<String> = match &schema.covariates {
        Some(c) => c.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|(i, _)| ![iz, ia, iy].contains(i))
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let icov = covariates
        .iter()
        .map(|c| column(path, &header, c))
        .collect::<Result<Vec<_>, _>>()?;

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let f = Field {
            path,
            line: rec.position().map(|p| p.line()).unwrap_or(0),
        };
        let z = f.bit(&schema.z, &rec[iz])?;
        let a = f.bit(&schema.a, &rec[ia])?;
        let y = f.real(&schema.y, &rec[iy])?;
        let cov = icov.iter().map(|&i| rec[i].to_string()).collect();
        records.push((z, a, y, cov));
    }
    ObservedDataset::from_records(covariates, records).map_err(|source| IoError::Data {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(io_err(path))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s != s.trim() {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn dataset_to_csv(data: &ObservedDataset) -> String {
    let mut out = String::from("z,a,y");
    for c in data.covariate_names() {
        out.push(',');
        out.push_str(&csv_field(c));
    }
    out.push('\n');
    for r in data.rows() {
        let _ = write!(out, "{},{},{}", r.z as u8, r.a as u8, format_g17(r.y));
        for v in &data.strata()[r.stratum as usize] {
            out.push(',');
            out.push_str(&csv_field(v));
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset(data: &ObservedDataset, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_text(path.as_ref(), &dataset_to_csv(data))
}

/// Row count and per-stratum counts, one line.
pub fn dataset_summary(data: &ObservedDataset) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in data.rows() {
        *counts.entry(data.stratum_label(r.stratum)).or_default() += 1;
    }
    let strata: Vec<String> = counts
        .iter()
        .map(|(k, v)| format!("{}={v}", if k.is_empty() { "(all)" } else { k }))
        .collect();
    format!("{} rows; strata: {}", data.len(), strata.join(", "))
}

// ---------------------------------------------------------------------------
// Panels

pub fn panel_to_csv(panel: &CounterfactualPanel) -> String {
    let mut out = PANEL_HEADER.join(",");
    out.push('\n');
    for r in &panel.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            format_g17(r.u),
            csv_field(panel.label(r)),
            r.z as u8,
            r.a0 as u8,
            r.a1 as u8,
            format_g17(r.y0),
            format_g17(r.y1),
            r.ctype.as_str(),
            r.nudge as u8
        );
    }
    out
}

pub fn write_panel(panel: &CounterfactualPanel, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_text(path.as_ref(), &panel_to_csv(panel))
}

pub fn read_panel(path: impl AsRef<Path>) -> Result<CounterfactualPanel, IoError> {
    let path = path.as_ref();
    let (mut reader, header) = open_csv(path)?;
    if header != PANEL_HEADER {
        return Err(IoError::Csv {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}", PANEL_HEADER.join(",")),
        });
    }
    let mut strata: Vec<String> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let f = Field {
            path,
            line: rec.position().map(|p| p.line()).unwrap_or(0),
        };
        let label = rec[1].to_string();
        let next = strata.len() as u32;
        let l = *index.entry(label.clone()).or_insert_with(|| {
            strata.push(label);
            next
        });
        let row = PanelRow::new(
            f.real("u", &rec[0])?,
            l,
            f.bit("z", &rec[2])?,
            f.bit("a0", &rec[3])?,
            f.bit("a1", &rec[4])?,
            f.real("y0", &rec[5])?,
            f.real("y1", &rec[6])?,
        );
        if ComplianceType::parse(&rec[7]) != Some(row.ctype) {
            return Err(f.domain("ctype", format!("`{}` inconsistent with a0, a1", &rec[7])));
        }
        if f.bit("nudge", &rec[8])? != row.nudge {
            return Err(f.domain("nudge", "inconsistent with a0, a1".into()));
        }
        rows.push(row);
    }
    Ok(CounterfactualPanel { strata, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glim::{observe, simulate_panel};
    use crate::scenarios;

    fn p(name: &str) -> PathBuf {
        PathBuf::from(name)
    }

    #[test]
    fn g17_matches_c_formatting() {
        assert_eq!(format_g17(0.5), "0.5");
        assert_eq!(format_g17(0.3), "0.29999999999999999");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(-2.5e-7), "-2.4999999999999999e-07");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(123456.0), "123456");
        assert_eq!(format_g17(1e-4), "0.0001");
        for x in [std::f64::consts::PI, -1.0 / 3.0, 6.02214076e23, 5e-324] {
            assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn scenario_round_trip() {
        for spec in scenarios::all() {
            let text = scenario_to_string(&spec);
            assert_eq!(parse_scenario(&text, &p("mem")).unwrap(), spec);
        }
    }

    #[test]
    fn misspelled_link_is_a_schema_error() {
        let text = scenario_to_string(&scenarios::s1_monotone()).replace("\"additive\"", "\"addittive\"");
        match parse_scenario(&text, &p("f.json")).unwrap_err() {
            IoError::Schema { json_path, message, .. } => {
                assert_eq!(json_path, "glim.link");
                assert!(message.contains("addittive"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_and_missing_keys_are_rejected() {
        let base = scenario_to_string(&scenarios::s2_logistic());
        let extra = base.replace("\"noise_sd\"", "\"colour\": 1,\n    \"noise_sd\"");
        assert!(matches!(parse_scenario(&extra, &p("x")), Err(IoError::Schema { .. })));
        let no_version = base.replace("\"schema_version\": 1,", "");
        assert!(matches!(parse_scenario(&no_version, &p("x")), Err(IoError::Schema { .. })));
        let wrong_version = base.replace("\"schema_version\": 1,", "\"schema_version\": 2,");
        match parse_scenario(&wrong_version, &p("x")).unwrap_err() {
            IoError::Schema { json_path, .. } => assert_eq!(json_path, "schema_version"),
            e => panic!("{e}"),
        }
        match parse_scenario("{\"schema_version\": 1,", &p("x")).unwrap_err() {
            IoError::Parse { line, .. } => assert_eq!(line, 1),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn panel_round_trip_and_layout() {
        let spec = validate_spec(scenarios::s5_two_strata()).unwrap();
        let panel = simulate_panel(&spec, 3, 17).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        write_panel(&panel, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), "u,l,z,a0,a1,y0,y1,ctype,nudge");
        assert_eq!(read_panel(&path).unwrap(), panel);
    }

    #[test]
    fn observed_round_trip() {
        let spec = validate_spec(scenarios::s5_two_strata()).unwrap();
        let data = observe(&simulate_panel(&spec, 200, 4).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        write_dataset(&data, &path).unwrap();
        let back = read_dataset(&path, &DatasetSchema::default()).unwrap();
        assert_eq!(back.len(), data.len());
        for (a, b) in data.rows().iter().zip(back.rows()) {
            assert_eq!((a.z, a.a, a.y), (b.z, b.a, b.y));
            assert_eq!(data.stratum_label(a.stratum), back.stratum_label(b.stratum));
        }
    }

    #[test]
    fn dataset_domain_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "z,a,y\n1,1,0.5\n0,0,1\n1,0,2\n0,1,3\n").unwrap();
        assert_eq!(read_dataset(&path, &DatasetSchema::default()).unwrap().len(), 4);
        fs::write(&path, "z,a,y\n1,1,0.5\n0,2,1\n").unwrap();
        match read_dataset(&path, &DatasetSchema::default()).unwrap_err() {
            IoError::Domain { line, column, .. } => assert_eq!((line, column.as_str()), (3, "a")),
            e => panic!("{e}"),
        }
        fs::write(&path, "z,a,y\n1,1,inf\n").unwrap();
        assert!(matches!(
            read_dataset(&path, &DatasetSchema::default()),
            Err(IoError::Domain { .. })
        ));
        fs::write(&path, "z,y\n1,1\n").unwrap();
        assert!(matches!(
            read_dataset(&path, &DatasetSchema::default()),
            Err(IoError::Csv { line: 1, .. })
        ));
    }

    #[test]
    fn report_has_schema_version_first() {
        #[derive(Serialize)]
        struct R {
            point: f64,
        }
        let s = report_to_string(&R { point: 1.5 });
        assert!(s.starts_with("{\n  \"schema_version\": 1,\n  \"point\": 1.5"));
    }
}
