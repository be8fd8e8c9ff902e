//! Instrumental-variable identification of the nudge average treatment
//! effect (NATE), the LATE, ATE and ATT under generalized latent index
//! selection models.
//!
//! * [`glim`] defines selection scenarios and simulates counterfactual panels.
//! * [`oracle`] computes exact population targets and identified estimands.
//! * [`estimators`] computes Wald-type estimates from observed data.
//! * [`inference`] adds bootstrap uncertainty and Monte Carlo studies.
//! * [`io`] reads and writes scenarios, datasets, panels and reports.
//! * [`cli`] is the command-line front end.

pub mod cli;
pub mod data;
pub mod estimators;
pub mod functional;
pub mod glim;
pub mod inference;
pub mod io;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod scenarios;

pub use data::{Observation, ObservedDataset};
pub use glim::{validate_spec, ScenarioSpec, ValidatedScenario};
