//! Model parameters, validation, and the closed-form constants attached to a
//! two-regime switching diffusion
//!
//! ```text
//! dX_t = b(X_t, Z_t) dt + dW_t,   Z_t in {plus, minus}
//! ```
//!
//! Regime `plus` has drift `b_+(x) >= r_+` and leaves at rate `lambda_plus`;
//! regime `minus` has drift `b_-(x) >= -r_-` and leaves at rate
//! `lambda_minus`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation, Violations};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Plus,
    Minus,
}

impl Regime {
    pub fn flip(self) -> Self {
        match self {
            Regime::Plus => Regime::Minus,
            Regime::Minus => Regime::Plus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Plus => "plus",
            Regime::Minus => "minus",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type DriftFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Shape of a non-constant drift.
#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftFunction {
    /// `offset + amplitude * sin(frequency * x)`
    Sinusoid {
        offset: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// Arbitrary callable; not representable in a config file.
    #[serde(skip)]
    Custom(DriftFn),
}

impl DriftFunction {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        DriftFunction::Custom(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DriftFunction::Sinusoid {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (frequency * x).sin(),
            DriftFunction::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for DriftFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftFunction::Sinusoid {
                offset,
                amplitude,
                frequency,
            } => f
                .debug_struct("Sinusoid")
                .field("offset", offset)
                .field("amplitude", amplitude)
                .field("frequency", frequency)
                .finish(),
            DriftFunction::Custom(func) => write!(f, "Custom({:p})", Arc::as_ptr(func)),
        }
    }
}

impl PartialEq for DriftFunction {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                DriftFunction::Sinusoid {
                    offset: a0,
                    amplitude: a1,
                    frequency: a2,
                },
                DriftFunction::Sinusoid {
                    offset: b0,
                    amplitude: b1,
                    frequency: b2,
                },
            ) => a0 == b0 && a1 == b1 && a2 == b2,
            (DriftFunction::Custom(a), DriftFunction::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Drift in one regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Drift {
    Constant(f64),
    /// A bounded function together with its declared lower bound.
    Bounded { func: DriftFunction, lower: f64 },
}

impl Drift {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Drift::Constant(b) => *b,
            Drift::Bounded { func, .. } => func.eval(x),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Drift::Constant(b) => Some(*b),
            Drift::Bounded { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub drift_plus: Drift,
    pub drift_minus: Drift,
    pub r_plus: f64,
    pub r_minus: f64,
    pub sup_b_plus: f64,
    pub sup_b_minus: f64,
    pub x0: f64,
    pub z0: Regime,
}

impl ModelSpec {
    /// Constant drifts sitting exactly on their bounds: `b_+ = r_+`, `b_- = -r_-`.
    pub fn at_bounds(lambda_plus: f64, r_plus: f64, lambda_minus: f64, r_minus: f64) -> Self {
        Self {
            lambda_plus,
            lambda_minus,
            drift_plus: Drift::Constant(r_plus),
            drift_minus: Drift::Constant(-r_minus),
            r_plus,
            r_minus,
            sup_b_plus: r_plus,
            sup_b_minus: r_minus,
            x0: 0.0,
            z0: Regime::Plus,
        }
    }

    pub fn with_start(mut self, x0: f64, z0: Regime) -> Self {
        self.x0 = x0;
        self.z0 = z0;
        self
    }
}

/// Points at which bounded drifts are checked against their declared bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeGrid {
    /// Probes cover `[x0 - half_width, x0 + half_width]`.
    pub half_width: f64,
    pub points: usize,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            half_width: 100.0,
            points: 1001,
        }
    }
}

impl ProbeGrid {
    fn xs(&self, centre: f64) -> impl Iterator<Item = f64> + '_ {
        let n = self.points.max(1);
        let lo = centre - self.half_width;
        let step = if n > 1 {
            2.0 * self.half_width / (n - 1) as f64
        } else {
            0.0
        };
        (0..n).map(move |i| if n == 1 { centre } else { lo + step * i as f64 })
    }
}

/// A [`ModelSpec`] that passed validation. Immutable.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedModel {
    spec: ModelSpec,
}

impl ValidatedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn rate(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Plus => self.spec.lambda_plus,
            Regime::Minus => self.spec.lambda_minus,
        }
    }

    pub fn drift(&self, regime: Regime) -> &Drift {
        match regime {
            Regime::Plus => &self.spec.drift_plus,
            Regime::Minus => &self.spec.drift_minus,
        }
    }

    /// `(b_+, b_-)` when both drifts are constant.
    pub fn constant_drifts(&self) -> Result<(f64, f64)> {
        let p = self
            .spec
            .drift_plus
            .as_constant()
            .ok_or(Error::NonConstantDrift(Regime::Plus))?;
        let m = self
            .spec
            .drift_minus
            .as_constant()
            .ok_or(Error::NonConstantDrift(Regime::Minus))?;
        Ok((p, m))
    }

    /// Both drifts constant and equal to `r_+` and `-r_-` respectively.
    pub fn is_at_bounds(&self) -> bool {
        matches!(self.constant_drifts(), Ok((p, m)) if p == self.spec.r_plus && m == -self.spec.r_minus)
    }

    /// Exact long-run velocity of `X` for constant drifts (renewal-reward):
    /// the time-average of the drift under the stationary regime law.
    pub fn constant_drift_velocity(&self) -> Result<f64> {
        let (bp, bm) = self.constant_drifts()?;
        let (lp, lm) = (self.spec.lambda_plus, self.spec.lambda_minus);
        Ok((bp / lp + bm / lm) / (1.0 / lp + 1.0 / lm))
    }
}

pub fn validate(spec: ModelSpec) -> Result<ValidatedModel> {
    validate_with(spec, &ProbeGrid::default())
}

pub fn validate_with(spec: ModelSpec, grid: &ProbeGrid) -> Result<ValidatedModel> {
    let mut errs = Vec::new();

    let scalars = [
        ("lambda_plus", spec.lambda_plus),
        ("lambda_minus", spec.lambda_minus),
        ("r_plus", spec.r_plus),
        ("r_minus", spec.r_minus),
        ("sup_b_plus", spec.sup_b_plus),
        ("sup_b_minus", spec.sup_b_minus),
        ("x0", spec.x0),
    ];
    for (field, value) in scalars {
        if !value.is_finite() {
            errs.push(Violation::NonFinite { field, value });
        }
    }
    for (field, value) in [("lambda_plus", spec.lambda_plus), ("lambda_minus", spec.lambda_minus)] {
        if value.is_finite() && value <= 0.0 {
            errs.push(Violation::NonPositiveIntensity { field, value });
        }
    }
    for (field, value) in [
        ("r_plus", spec.r_plus),
        ("r_minus", spec.r_minus),
        ("sup_b_plus", spec.sup_b_plus),
        ("sup_b_minus", spec.sup_b_minus),
    ] {
        if value.is_finite() && value <= 0.0 {
            errs.push(Violation::NonPositiveDriftBound { field, value });
        }
    }
    if spec.r_plus > spec.sup_b_plus {
        errs.push(Violation::BoundExceedsSup {
            field: "r_plus",
            value: spec.r_plus,
            sup: spec.sup_b_plus,
        });
    }
    if spec.r_minus > spec.sup_b_minus {
        errs.push(Violation::BoundExceedsSup {
            field: "r_minus",
            value: spec.r_minus,
            sup: spec.sup_b_minus,
        });
    }

    if spec.x0.is_finite() {
        check_drift(
            Regime::Plus,
            &spec.drift_plus,
            spec.r_plus,
            spec.sup_b_plus,
            spec.x0,
            grid,
            &mut errs,
        );
        check_drift(
            Regime::Minus,
            &spec.drift_minus,
            -spec.r_minus,
            spec.sup_b_minus,
            spec.x0,
            grid,
            &mut errs,
        );
    }

    if errs.is_empty() {
        Ok(ValidatedModel { spec })
    } else {
        Err(Error::InvalidModel(Violations(errs)))
    }
}

fn check_drift(
    regime: Regime,
    drift: &Drift,
    bound: f64,
    sup: f64,
    x0: f64,
    grid: &ProbeGrid,
    errs: &mut Vec<Violation>,
) {
    let field = match regime {
        Regime::Plus => "drift_plus",
        Regime::Minus => "drift_minus",
    };
    match drift {
        Drift::Constant(b) => {
            if !b.is_finite() {
                errs.push(Violation::NonFinite { field, value: *b });
            } else if *b < bound {
                errs.push(Violation::BoundViolatedAtProbe {
                    regime,
                    x: x0,
                    value: *b,
                    bound,
                });
            } else if b.abs() > sup {
                errs.push(Violation::BoundExceedsSup {
                    field,
                    value: *b,
                    sup,
                });
            }
        }
        Drift::Bounded { func, lower } => {
            if !lower.is_finite() {
                errs.push(Violation::NonFinite {
                    field,
                    value: *lower,
                });
                return;
            }
            if *lower < bound {
                errs.push(Violation::BoundViolatedAtProbe {
                    regime,
                    x: f64::NAN,
                    value: *lower,
                    bound,
                });
            }
            // Report only the first failing probe per regime.
            for x in grid.xs(x0) {
                let v = func.eval(x);
                if !v.is_finite() {
                    errs.push(Violation::NonFinite { field, value: v });
                    break;
                }
                if v < *lower || v.abs() > sup {
                    errs.push(Violation::BoundViolatedAtProbe {
                        regime,
                        x,
                        value: v,
                        bound: if v < *lower { *lower } else { sup },
                    });
                    break;
                }
            }
        }
    }
}

/// Whether `r_+ / lambda_+ > r_- / lambda_-` holds strictly.
pub fn transience_condition(
    r_plus: f64,
    lambda_plus: f64,
    r_minus: f64,
    lambda_minus: f64,
) -> Result<bool> {
    for (name, v) in [
        ("r_plus", r_plus),
        ("lambda_plus", lambda_plus),
        ("r_minus", r_minus),
        ("lambda_minus", lambda_minus),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(r_plus / lambda_plus > r_minus / lambda_minus)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnalyticConstants {
    /// Mean cycle length `1/lambda_+ + 1/lambda_-`.
    pub mean_cycle: f64,
    /// `(lambda_- r_+ - lambda_+ r_-) / (lambda_+ + lambda_-)`.
    pub velocity_star: f64,
    /// True when `velocity_star` is the exact asymptotic velocity (drifts
    /// constant at their bounds); otherwise it is a lower-bound heuristic.
    pub velocity_exact: bool,
    /// Upper edge of the admissible window for `a_hat`; same expression as
    /// `velocity_star`.
    pub a_hat_max: f64,
    /// `min(mean_cycle, a_hat_max)`. The two arguments carry different units
    /// (time vs. space/time); the cap is kept in its published form.
    pub c1_max: f64,
    pub transient: bool,
}

pub fn analytic_constants(model: &ValidatedModel) -> AnalyticConstants {
    let s = model.spec();
    let (lp, lm, rp, rm) = (s.lambda_plus, s.lambda_minus, s.r_plus, s.r_minus);
    let mean_cycle = 1.0 / lp + 1.0 / lm;
    let velocity_star = (lm * rp - lp * rm) / (lp + lm);
    AnalyticConstants {
        mean_cycle,
        velocity_star,
        velocity_exact: model.is_at_bounds(),
        a_hat_max: velocity_star,
        c1_max: mean_cycle.min(velocity_star),
        transient: rp / lp > rm / lm,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct A2 {
    pub value: f64,
    /// `0 < a_hat < a_hat_max`, the window in which `value > 0`.
    pub in_window: bool,
}

/// `a_2 = -[(a_hat - r_+)/lambda_+ + (a_hat + r_-)/lambda_-]`.
pub fn a2_coefficient(
    a_hat: f64,
    r_plus: f64,
    r_minus: f64,
    lambda_plus: f64,
    lambda_minus: f64,
) -> A2 {
    let value = -((a_hat - r_plus) / lambda_plus + (a_hat + r_minus) / lambda_minus);
    let a_hat_max = (lambda_minus * r_plus - lambda_plus * r_minus) / (lambda_plus + lambda_minus);
    A2 {
        value,
        in_window: a_hat > 0.0 && a_hat < a_hat_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base() -> ModelSpec {
        ModelSpec {
            lambda_plus: 1.0,
            lambda_minus: 2.0,
            drift_plus: Drift::Constant(1.0),
            drift_minus: Drift::Constant(-1.0),
            r_plus: 1.0,
            r_minus: 1.0,
            sup_b_plus: 1.0,
            sup_b_minus: 1.0,
            x0: 0.0,
            z0: Regime::Plus,
        }
    }

    fn violations(spec: ModelSpec) -> Vec<Violation> {
        match validate(spec) {
            Err(Error::InvalidModel(v)) => v.0,
            other => panic!("expected violations, got {other:?}"),
        }
    }

    #[test]
    fn valid_constant_model() {
        assert!(validate(base()).is_ok());
    }

    #[test]
    fn zero_intensity_rejected() {
        let v = violations(ModelSpec {
            lambda_plus: 0.0,
            ..base()
        });
        assert!(matches!(
            v[0],
            Violation::NonPositiveIntensity {
                field: "lambda_plus",
                ..
            }
        ));
    }

    #[test]
    fn constant_below_bound_rejected() {
        let v = violations(ModelSpec {
            drift_plus: Drift::Constant(0.5),
            ..base()
        });
        assert!(matches!(
            v[0],
            Violation::BoundViolatedAtProbe {
                regime: Regime::Plus,
                ..
            }
        ));
    }

    #[test]
    fn nan_field_rejected_and_all_violations_listed() {
        let v = violations(ModelSpec {
            lambda_minus: f64::NAN,
            r_minus: -1.0,
            ..base()
        });
        assert!(v.iter().any(|e| matches!(e, Violation::NonFinite { field: "lambda_minus", .. })));
        assert!(v.iter().any(|e| matches!(e, Violation::NonPositiveDriftBound { field: "r_minus", .. })));
    }

    #[test]
    fn bounded_drift_probed_on_grid() {
        let ok = ModelSpec {
            drift_plus: Drift::Bounded {
                func: DriftFunction::Sinusoid {
                    offset: 1.5,
                    amplitude: 0.5,
                    frequency: 1.0,
                },
                lower: 1.0,
            },
            sup_b_plus: 2.0,
            ..base()
        };
        assert!(validate(ok.clone()).is_ok());

        // Dips below r_+ only far from x0: x > 50.
        let bad = ModelSpec {
            drift_plus: Drift::Bounded {
                func: DriftFunction::custom(|x| if x > 50.0 { 0.5 } else { 1.0 }),
                lower: 1.0,
            },
            ..base()
        };
        let v = violations(bad.clone());
        match v[0] {
            Violation::BoundViolatedAtProbe { x, .. } => assert!(x > 50.0),
            ref e => panic!("{e:?}"),
        }
        // A narrower probe grid cannot see it.
        let narrow = ProbeGrid {
            half_width: 10.0,
            points: 101,
        };
        assert!(validate_with(bad, &narrow).is_ok());
    }

    #[test]
    fn transience_examples() {
        assert!(transience_condition(1.0, 1.0, 1.0, 2.0).unwrap());
        assert!(!transience_condition(1.0, 1.0, 1.0, 1.0).unwrap());
        assert!(transience_condition(0.5, 2.0, 0.1, 1.0).unwrap());
        assert!(transience_condition(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn constants_examples() {
        let m = validate(ModelSpec::at_bounds(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(analytic_constants(&m).mean_cycle, 2.0);

        let m = validate(ModelSpec::at_bounds(2.0, 1.0, 3.0, 1.0)).unwrap();
        assert_relative_eq!(analytic_constants(&m).mean_cycle, 5.0 / 6.0, max_relative = 1e-15);

        let m = validate(base()).unwrap();
        let c = analytic_constants(&m);
        // Renewal-reward: (r+/l+ - r-/l-) / (1/l+ + 1/l-) = (1 - 1/2) / (3/2).
        assert_relative_eq!(c.velocity_star, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(m.constant_drift_velocity().unwrap(), 1.0 / 3.0, max_relative = 1e-15);
        assert!(c.transient && c.velocity_exact);
        assert_eq!(c.c1_max, 1.0 / 3.0);
    }

    #[test]
    fn a2_examples() {
        let a = a2_coefficient(0.0, 1.0, 0.2, 1.0, 1.0);
        assert_relative_eq!(a.value, 0.8, max_relative = 1e-15);
        assert!(!a.in_window);

        // a_hat_max = 0.5 for l+ = l- = 1, r+ = 1, r- = 0.
        let a = a2_coefficient(0.5, 1.0, 0.0, 1.0, 1.0);
        assert_eq!(a.value, 0.0);
        assert!(!a.in_window);

        let a = a2_coefficient(0.25, 1.0, 0.0, 1.0, 1.0);
        assert!(a.in_window && a.value > 0.0);

        let (rp, rm, lp, lm) = (0.7, 0.3, 1.5, 0.4);
        assert_relative_eq!(
            a2_coefficient(0.0, rp, rm, lp, lm).value,
            rp / lp - rm / lm,
            max_relative = 1e-14
        );
    }
}
