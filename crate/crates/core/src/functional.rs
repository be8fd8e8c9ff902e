//! Outcome functionals `h(y)` used by the arm-specific Wald ratio.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("invalid functional `{input}`: {reason}")]
pub struct FunctionalParseError {
    pub input: String,
    pub reason: String,
}

/// A bounded-on-the-data function of the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    Identity,
    Square,
    Constant { value: f64 },
    /// `1{y ≤ c}`.
    IndicatorLeq { c: f64 },
    /// `1{y ≤ c} − 1/2`, the median moment.
    CenteredIndicatorLeq { c: f64 },
    /// Linear interpolation between `(x, h(x))` knots with constant
    /// extension beyond the outermost knots.
    Tabulated { knots: Vec<(f64, f64)> },
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub(crate) fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl Functional {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Functional::Identity => y,
            Functional::Square => y * y,
            Functional::Constant { value } => *value,
            Functional::IndicatorLeq { c } => (y <= *c) as u8 as f64,
            Functional::CenteredIndicatorLeq { c } => (y <= *c) as u8 as f64 - 0.5,
            Functional::Tabulated { knots } => interpolate(knots, y),
        }
    }

    /// `E[h(m + σZ)]` for `Z ~ N(0, 1)`, in closed form for every variant.
    pub fn gaussian_expectation(&self, mean: f64, sd: f64) -> f64 {
        if sd == 0.0 {
            return self.eval(mean);
        }
        match self {
            Functional::Identity => mean,
            Functional::Square => mean * mean + sd * sd,
            Functional::Constant { value } => *value,
            Functional::IndicatorLeq { c } => normal_cdf((c - mean) / sd),
            Functional::CenteredIndicatorLeq { c } => normal_cdf((c - mean) / sd) - 0.5,
            Functional::Tabulated { knots } => tabulated_gaussian(knots, mean, sd),
        }
    }

    /// Outcome values where `h` jumps or kinks.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Functional::IndicatorLeq { c } | Functional::CenteredIndicatorLeq { c } => vec![*c],
            Functional::Tabulated { knots } => knots.iter().map(|k| k.0).collect(),
            _ => Vec::new(),
        }
    }

    /// Parses `identity`, `square`, `one`, `const:<v>`, `leq:<c>`,
    /// `centered-leq:<c>` or `table:<x>:<h>,<x>:<h>,...`.
    pub fn parse(s: &str) -> Result<Self, FunctionalParseError> {
        let err = |reason: &str| FunctionalParseError {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let num = |t: &str| -> Result<f64, FunctionalParseError> {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(&format!("`{t}` is not a finite number")))
        };
        let s_trim = s.trim();
        match s_trim {
            "identity" | "y" => return Ok(Functional::Identity),
            "square" | "y2" => return Ok(Functional::Square),
            "one" => return Ok(Functional::Constant { value: 1.0 }),
            _ => {}
        }
        let (head, rest) = s_trim
            .split_once(':')
            .ok_or_else(|| err("expected identity, square, one, const:v, leq:c, centered-leq:c or table:x:h,..."))?;
        match head {
            "const" => Ok(Functional::Constant { value: num(rest)? }),
            "leq" => Ok(Functional::IndicatorLeq { c: num(rest)? }),
            "centered-leq" => Ok(Functional::CenteredIndicatorLeq { c: num(rest)? }),
            "table" => {
                let mut knots = Vec::new();
                for pair in rest.split(',') {
                    let (x, h) = pair
                        .split_once(':')
                        .ok_or_else(|| err("table entries are x:h pairs"))?;
                    knots.push((num(x)?, num(h)?));
                }
                Self::tabulated(knots).map_err(|r| err(&r))
            }
            _ => Err(err("unknown functional kind")),
        }
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self, String> {
        if knots.is_empty() {
            return Err("table needs at least one knot".into());
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err("table knots must be strictly increasing in x".into());
        }
        if knots.iter().any(|k| !k.0.is_finite() || !k.1.is_finite()) {
            return Err("table knots must be finite".into());
        }
        Ok(Functional::Tabulated { knots })
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Identity => write!(f, "identity"),
            Functional::Square => write!(f, "square"),
            Functional::Constant { value } => write!(f, "const:{value}"),
            Functional::IndicatorLeq { c } => write!(f, "leq:{c}"),
            Functional::CenteredIndicatorLeq { c } => write!(f, "centered-leq:{c}"),
            Functional::Tabulated { knots } => {
                write!(f, "table:")?;
                for (i, (x, h)) in knots.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}:{h}")?;
                }
                Ok(())
            }
        }
    }
}

fn interpolate(knots: &[(f64, f64)], y: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if y <= first.0 {
        return first.1;
    }
    if y >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|k| k.0 <= y);
    let (x0, h0) = knots[i - 1];
    let (x1, h1) = knots[i];
    h0 + (h1 - h0) * (y - x0) / (x1 - x0)
}

fn tabulated_gaussian(knots: &[(f64, f64)], mean: f64, sd: f64) -> f64 {
    let z = |x: f64| (x - mean) / sd;
    let first = knots[0];
    let last = knots[knots.len() - 1];
    let mut total = first.1 * normal_cdf(z(first.0)) + last.1 * (1.0 - normal_cdf(z(last.0)));
    for w in knots.windows(2) {
        let (x0, h0) = w[0];
        let (x1, h1) = w[1];
        let slope = (h1 - h0) / (x1 - x0);
        let intercept = h0 - slope * x0;
        let (a, b) = (z(x0), z(x1));
        // E[(α + βY) 1{x0 < Y ≤ x1}] for Y ~ N(mean, sd²)
        total += (intercept + slope * mean) * (normal_cdf(b) - normal_cdf(a))
            + slope * sd * (normal_pdf(a) - normal_pdf(b));
    }
    total
}
