use std::fmt;

use thiserror::Error;

use crate::model::Regime;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single broken model assumption found during validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("{field} must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("switching intensity {field} must be positive, got {value}")]
    NonPositiveIntensity { field: &'static str, value: f64 },
    #[error("drift bound {field} must be positive, got {value}")]
    NonPositiveDriftBound { field: &'static str, value: f64 },
    #[error("{field} = {value} exceeds sup-norm bound {sup}")]
    BoundExceedsSup {
        field: &'static str,
        value: f64,
        sup: f64,
    },
    #[error("{regime} drift is {value} at x = {x}, violating bound {bound}")]
    BoundViolatedAtProbe {
        regime: Regime,
        x: f64,
        value: f64,
        bound: f64,
    },
}

/// Every violation found in one validation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Violations(pub Vec<Violation>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(Violations),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{0} drift is not constant")]
    NonConstantDrift(Regime),
    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("drift produced non-finite value {value} at t = {t}, x = {x}")]
    NonFiniteDrift { t: f64, x: f64, value: f64 },
    #[error("horizon {horizon} lies beyond the skeleton end {end}")]
    HorizonBeyondSkeleton { horizon: f64, end: f64 },
    #[error("skeleton does not cover a full cycle")]
    EmptySkeleton,
    #[error("malformed skeleton: {0}")]
    MalformedSkeleton(String),
    #[error("unknown statistic {0:?}")]
    UnknownStatistic(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("sample {index} failed: {source}")]
    Sample { index: u64, source: Box<Error> },
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
