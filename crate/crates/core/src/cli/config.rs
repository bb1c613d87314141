//! Run configuration documents (JSON).
//!
//! ```json
//! {
//!   "model": {
//!     "lambda_plus": 1, "lambda_minus": 2,
//!     "drift_plus": {"constant": 1}, "drift_minus": {"constant": -1},
//!     "r_plus": 1, "r_minus": 1, "sup_b_plus": 1, "sup_b_minus": 1,
//!     "x0": 0, "z0": "plus"
//!   },
//!   "command": "escape-rate",
//!   "params": {"horizon": 10000, "n_samples": 1000, "method": "exact"},
//!   "output": {"dir": "out", "format": "csv"},
//!   "seed": 7
//! }
//! ```
//!
//! Unknown keys are rejected everywhere. There is no diffusion coefficient
//! to configure: the noise is fixed at unit intensity.

use std::fmt;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::analytics::{TailDirection, DEFAULT_LAMBDA_CAP};
use crate::error::Error;
use crate::model::{validate, Drift, ModelSpec, Regime};
use crate::montecarlo::{MgfFormula, DEFAULT_LEMMA2_SLACK};
use crate::path::SimMethod;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("parse error in `{key}`: {message}")]
    Key { key: String, message: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
}

impl From<serde_json::Error> for ConfigError {
    fn from(e: serde_json::Error) -> Self {
        ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Check,
    Skeleton,
    Simulate,
    VerifyMgf,
    VerifyLln,
    Chernoff,
    EscapeRate,
    VerifyLemma2,
    VerifyTail,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Check => "check",
            CommandName::Skeleton => "skeleton",
            CommandName::Simulate => "simulate",
            CommandName::VerifyMgf => "verify-mgf",
            CommandName::VerifyLln => "verify-lln",
            CommandName::Chernoff => "chernoff",
            CommandName::EscapeRate => "escape-rate",
            CommandName::VerifyLemma2 => "verify-lemma2",
            CommandName::VerifyTail => "verify-tail",
        }
    }
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("switchdiff-out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            format: Format::Csv,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    #[default]
    Exact,
    Em,
}

fn default_dt() -> f64 {
    0.01
}

/// Integrator choice shared by the path-based commands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodParams {
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            method: MethodChoice::Exact,
            dt: default_dt(),
        }
    }
}

impl MethodParams {
    pub fn sim_method(&self) -> SimMethod {
        match self.method {
            MethodChoice::Exact => SimMethod::Exact,
            MethodChoice::Em => SimMethod::EulerMaruyama { dt: self.dt },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonParams {
    pub n_cycles: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub horizon: f64,
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_formulas() -> Vec<MgfFormula> {
    vec![MgfFormula::Deficit, MgfFormula::Excess]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MgfParams {
    pub lambdas: Vec<f64>,
    pub ns: Vec<u64>,
    pub n_samples: u64,
    #[serde(default = "default_formulas")]
    pub formulas: Vec<MgfFormula>,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlnParams {
    pub n_cycles: usize,
    pub tolerance: f64,
    #[serde(default = "one")]
    pub repeats: u64,
}

fn default_direction() -> TailDirection {
    TailDirection::LowerTail
}

fn default_cap() -> f64 {
    DEFAULT_LAMBDA_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChernoffParams {
    #[serde(default = "default_direction")]
    pub direction: TailDirection,
    pub epsilon: f64,
    pub ns: Vec<u64>,
    #[serde(default = "default_cap")]
    pub lambda_cap: f64,
    /// Zero skips the empirical comparison.
    #[serde(default)]
    pub n_samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeParams {
    pub horizon: f64,
    pub n_samples: u64,
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_slack() -> f64 {
    DEFAULT_LEMMA2_SLACK
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma2Params {
    pub lambda: f64,
    #[serde(default)]
    pub a_hat: f64,
    pub n_cycles: u64,
    pub n_samples: u64,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailParams {
    pub c0: f64,
    pub epsilon: f64,
    pub horizons: Vec<f64>,
    pub n_samples: u64,
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Check,
    Skeleton(SkeletonParams),
    Simulate(SimulateParams),
    VerifyMgf(MgfParams),
    VerifyLln(LlnParams),
    Chernoff(ChernoffParams),
    EscapeRate(EscapeParams),
    VerifyLemma2(Lemma2Params),
    VerifyTail(TailParams),
}

impl Command {
    pub fn name(&self) -> CommandName {
        match self {
            Command::Check => CommandName::Check,
            Command::Skeleton(_) => CommandName::Skeleton,
            Command::Simulate(_) => CommandName::Simulate,
            Command::VerifyMgf(_) => CommandName::VerifyMgf,
            Command::VerifyLln(_) => CommandName::VerifyLln,
            Command::Chernoff(_) => CommandName::Chernoff,
            Command::EscapeRate(_) => CommandName::EscapeRate,
            Command::VerifyLemma2(_) => CommandName::VerifyLemma2,
            Command::VerifyTail(_) => CommandName::VerifyTail,
        }
    }

    fn params_value(&self) -> Option<Value> {
        let v = match self {
            Command::Check => return None,
            Command::Skeleton(p) => serde_json::to_value(p),
            Command::Simulate(p) => serde_json::to_value(p),
            Command::VerifyMgf(p) => serde_json::to_value(p),
            Command::VerifyLln(p) => serde_json::to_value(p),
            Command::Chernoff(p) => serde_json::to_value(p),
            Command::EscapeRate(p) => serde_json::to_value(p),
            Command::VerifyLemma2(p) => serde_json::to_value(p),
            Command::VerifyTail(p) => serde_json::to_value(p),
        };
        Some(v.expect("parameter structs serialize"))
    }

    fn from_parts(name: CommandName, params: Option<Value>) -> Result<Self, ConfigError> {
        fn parse<T: DeserializeOwned>(params: Option<Value>) -> Result<T, ConfigError> {
            let v = params.unwrap_or(Value::Object(Default::default()));
            serde_json::from_value(v).map_err(|e| ConfigError::Key {
                key: "params".into(),
                message: e.to_string(),
            })
        }
        Ok(match name {
            CommandName::Check => {
                match params {
                    None => {}
                    Some(Value::Object(m)) if m.is_empty() => {}
                    Some(_) => {
                        return Err(ConfigError::Key {
                            key: "params".into(),
                            message: "check takes no parameters".into(),
                        })
                    }
                }
                Command::Check
            }
            CommandName::Skeleton => Command::Skeleton(parse(params)?),
            CommandName::Simulate => Command::Simulate(parse(params)?),
            CommandName::VerifyMgf => Command::VerifyMgf(parse(params)?),
            CommandName::VerifyLln => Command::VerifyLln(parse(params)?),
            CommandName::Chernoff => Command::Chernoff(parse(params)?),
            CommandName::EscapeRate => Command::EscapeRate(parse(params)?),
            CommandName::VerifyLemma2 => Command::VerifyLemma2(parse(params)?),
            CommandName::VerifyTail => Command::VerifyTail(parse(params)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub model: ModelSpec,
    pub command: Command,
    pub output: OutputSpec,
    pub seed: u64,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawModel {
    lambda_plus: Option<f64>,
    lambda_minus: Option<f64>,
    drift_plus: Option<Drift>,
    drift_minus: Option<Drift>,
    r_plus: Option<f64>,
    r_minus: Option<f64>,
    sup_b_plus: Option<f64>,
    sup_b_minus: Option<f64>,
    x0: Option<f64>,
    z0: Option<Regime>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRunSpec {
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    command: Option<CommandName>,
    #[serde(default)]
    params: Option<Value>,
    #[serde(default)]
    output: Option<OutputSpec>,
    #[serde(default)]
    seed: Option<u64>,
}

/// Parses and fully validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunSpec, ConfigError> {
    let raw: RawRunSpec = serde_json::from_str(text)?;
    let command = raw.command.ok_or_else(|| ConfigError::Key {
        key: "command".into(),
        message: "missing field `command`".into(),
    })?;
    build(raw, command)
}

/// Like [`parse_config`], taking the command from the command line when the
/// document omits it. A document naming a different command is rejected.
pub fn parse_config_for(text: &str, command: CommandName) -> Result<RunSpec, ConfigError> {
    let raw: RawRunSpec = serde_json::from_str(text)?;
    match raw.command {
        Some(named) if named != command => Err(ConfigError::Key {
            key: "command".into(),
            message: format!("document names {named}, command line asks for {command}"),
        }),
        _ => build(raw, command),
    }
}

fn build(raw: RawRunSpec, name: CommandName) -> Result<RunSpec, ConfigError> {
    let mut problems = Vec::new();
    let m = raw.model;
    macro_rules! need {
        ($field:ident) => {
            m.$field.clone().unwrap_or_else(|| {
                problems.push(format!("model.{} is missing", stringify!($field)));
                Default::default()
            })
        };
    }
    let lambda_plus: f64 = need!(lambda_plus);
    let lambda_minus: f64 = need!(lambda_minus);
    let drift_plus: Option<Drift> = m.drift_plus.clone();
    let drift_minus: Option<Drift> = m.drift_minus.clone();
    if drift_plus.is_none() {
        problems.push("model.drift_plus is missing".into());
    }
    if drift_minus.is_none() {
        problems.push("model.drift_minus is missing".into());
    }
    let r_plus: f64 = need!(r_plus);
    let r_minus: f64 = need!(r_minus);
    let sup_b_plus: f64 = need!(sup_b_plus);
    let sup_b_minus: f64 = need!(sup_b_minus);
    let x0 = m.x0.unwrap_or(0.0);
    let z0 = m.z0.unwrap_or(Regime::Plus);

    let command = Command::from_parts(name, raw.params)?;
    problems.extend(check_params(&command));

    if !problems.is_empty() {
        return Err(ConfigError::Validation(problems));
    }
    let model = ModelSpec {
        lambda_plus,
        lambda_minus,
        drift_plus: drift_plus.expect("checked"),
        drift_minus: drift_minus.expect("checked"),
        r_plus,
        r_minus,
        sup_b_plus,
        sup_b_minus,
        x0,
        z0,
    };
    if let Err(Error::InvalidModel(v)) = validate(model.clone()) {
        return Err(ConfigError::Validation(
            v.0.iter().map(|e| format!("model: {e}")).collect(),
        ));
    }
    Ok(RunSpec {
        model,
        command,
        output: raw.output.unwrap_or_default(),
        seed: raw.seed.unwrap_or(0),
    })
}

fn check_params(command: &Command) -> Vec<String> {
    fn check_positive(p: &mut Vec<String>, name: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            p.push(format!("params.{name} must be positive, got {v}"));
        }
    }
    let mut p = Vec::new();
    match command {
        Command::Check => {}
        Command::Skeleton(s) => check_positive(&mut p, "n_cycles", s.n_cycles as f64),
        Command::Simulate(s) => {
            check_positive(&mut p, "horizon", s.horizon);
            check_positive(&mut p, "dt", s.dt);
        }
        Command::VerifyMgf(s) => {
            if s.lambdas.is_empty() || s.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                p.push("params.lambdas must be a non-empty list of values >= 0".into());
            }
            if s.ns.is_empty() || s.ns.contains(&0) {
                p.push("params.ns must be a non-empty list of positive integers".into());
            }
            if s.formulas.is_empty() {
                p.push("params.formulas must not be empty".into());
            }
            if s.n_samples < 2 {
                p.push("params.n_samples must be at least 2".into());
            }
        }
        Command::VerifyLln(s) => {
            check_positive(&mut p, "n_cycles", s.n_cycles as f64);
            check_positive(&mut p, "tolerance", s.tolerance);
            check_positive(&mut p, "repeats", s.repeats as f64);
        }
        Command::Chernoff(s) => {
            check_positive(&mut p, "epsilon", s.epsilon);
            check_positive(&mut p, "lambda_cap", s.lambda_cap);
            if s.ns.is_empty() || s.ns.contains(&0) {
                p.push("params.ns must be a non-empty list of positive integers".into());
            }
            if s.n_samples == 1 {
                p.push("params.n_samples must be 0 (analytic only) or at least 2".into());
            }
        }
        Command::EscapeRate(s) => {
            check_positive(&mut p, "horizon", s.horizon);
            check_positive(&mut p, "dt", s.dt);
            if s.n_samples < 2 {
                p.push("params.n_samples must be at least 2".into());
            }
        }
        Command::VerifyLemma2(s) => {
            if !(s.lambda.is_finite() && s.lambda >= 0.0) {
                p.push(format!("params.lambda must be >= 0, got {}", s.lambda));
            }
            if !(s.a_hat.is_finite() && s.a_hat >= 0.0) {
                p.push(format!("params.a_hat must be >= 0, got {}", s.a_hat));
            }
            if !(s.slack.is_finite() && s.slack >= 0.0) {
                p.push(format!("params.slack must be >= 0, got {}", s.slack));
            }
            check_positive(&mut p, "n_cycles", s.n_cycles as f64);
            check_positive(&mut p, "dt", s.dt);
            if s.n_samples < 2 {
                p.push("params.n_samples must be at least 2".into());
            }
        }
        Command::VerifyTail(s) => {
            check_positive(&mut p, "epsilon", s.epsilon);
            check_positive(&mut p, "dt", s.dt);
            if !s.c0.is_finite() {
                p.push("params.c0 must be finite".into());
            }
            if s.horizons.len() < 3 || s.horizons.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                p.push("params.horizons must hold at least 3 positive values".into());
            }
            if s.n_samples < 2 {
                p.push("params.n_samples must be at least 2".into());
            }
        }
    }
    p
}

/// Serializes a run configuration; [`parse_config`] reads it back unchanged.
pub fn serialize_config(spec: &RunSpec) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert("model".into(), serde_json::to_value(&spec.model).expect("model serializes"));
    doc.insert("command".into(), Value::String(spec.command.name().as_str().into()));
    if let Some(p) = spec.command.params_value() {
        doc.insert("params".into(), p);
    }
    doc.insert("output".into(), serde_json::to_value(&spec.output).expect("output serializes"));
    doc.insert("seed".into(), Value::from(spec.seed));
    serde_json::to_string_pretty(&Value::Object(doc)).expect("value serializes")
}
