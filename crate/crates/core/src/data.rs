//! Observed data `(Z, A, Y, L)`.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("dataset has no rows")]
    Empty,
    #[error("row {row}: outcome {value} is not finite")]
    NonFiniteOutcome { row: usize, value: f64 },
    #[error("row {row}: expected {expected} covariate values, found {found}")]
    CovariateArity {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: stratum index {index} out of range")]
    BadStratum { row: usize, index: u32 },
}

/// One observed unit. `stratum` indexes [`ObservedDataset::strata`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub z: bool,
    pub a: bool,
    pub y: f64,
    pub stratum: u32,
}

/// Observed columns only. Covariates are categorical; each distinct tuple of
/// covariate values is one L-stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedDataset {
    covariate_names: Vec<String>,
    strata: Vec<Vec<String>>,
    rows: Vec<Observation>,
}

impl ObservedDataset {
    pub fn new(
        covariate_names: Vec<String>,
        strata: Vec<Vec<String>>,
        rows: Vec<Observation>,
    ) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        for (i, s) in strata.iter().enumerate() {
            if s.len() != covariate_names.len() {
                return Err(DataError::CovariateArity {
                    row: i,
                    expected: covariate_names.len(),
                    found: s.len(),
                });
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if !r.y.is_finite() {
                return Err(DataError::NonFiniteOutcome { row: i, value: r.y });
            }
            if r.stratum as usize >= strata.len() {
                return Err(DataError::BadStratum {
                    row: i,
                    index: r.stratum,
                });
            }
        }
        Ok(Self {
            covariate_names,
            strata,
            rows,
        })
    }

    /// Builds a dataset from rows carrying their covariate values, interning
    /// strata in order of first appearance.
    pub fn from_records<I>(covariate_names: Vec<String>, records: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (bool, bool, f64, Vec<String>)>,
    {
        let mut index: HashMap<Vec<String>, u32> = HashMap::new();
        let mut strata = Vec::new();
        let mut rows = Vec::new();
        for (i, (z, a, y, cov)) in records.into_iter().enumerate() {
            if cov.len() != covariate_names.len() {
                return Err(DataError::CovariateArity {
                    row: i,
                    expected: covariate_names.len(),
                    found: cov.len(),
                });
            }
            let next = strata.len() as u32;
            let id = *index.entry(cov.clone()).or_insert_with(|| {
                strata.push(cov);
                next
            });
            rows.push(Observation {
                z,
                a,
                y,
                stratum: id,
            });
        }
        Self::new(covariate_names, strata, rows)
    }

    /// Dataset with no covariates (a single stratum).
    pub fn without_covariates<I>(rows: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (bool, bool, f64)>,
    {
        let rows = rows
            .into_iter()
            .map(|(z, a, y)| Observation {
                z,
                a,
                y,
                stratum: 0,
            })
            .collect();
        Self::new(Vec::new(), vec![Vec::new()], rows)
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn strata(&self) -> &[Vec<String>] {
        &self.strata
    }

    /// Covariate values of a stratum joined with `|`; empty when there are
    /// no covariates.
    pub fn stratum_label(&self, stratum: u32) -> String {
        self.strata[stratum as usize].join("|")
    }

    /// Rows at the given indices (with repetition), sharing the stratum table.
    pub fn resample(&self, indices: &[usize]) -> Self {
        Self {
            covariate_names: self.covariate_names.clone(),
            strata: self.strata.clone(),
            rows: indices.iter().map(|&i| self.rows[i]).collect(),
        }
    }

    /// Same rows with `y` replaced by `f(y)`.
    pub fn map_outcome(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            covariate_names: self.covariate_names.clone(),
            strata: self.strata.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| Observation { y: f(r.y), ..*r })
                .collect(),
        }
    }
}
