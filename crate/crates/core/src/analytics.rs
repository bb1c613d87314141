//! Closed-form moment generating functions of the cycle-time sum `T_{2n}`,
//! Chernoff bounds built on them, the geometric bound for `X_{T_{2n}}`, and a
//! least-squares fit for exponential decay rates.
//!
//! With `T_0 ~ Exp(lambda_-)` (start in `minus`) and `n` independent
//! `Exp(lambda_+) + Exp(lambda_-)` cycles after it:
//!
//! ```text
//! E e^{l(C n - T_2n)} = lm/(lm + l) * [lp lm / ((lp + l)(lm + l)) * e^{C l}]^n
//! E e^{l(T_2n - C n)} = lm/(lm - l) * [lp lm / ((lp - l)(lm - l)) * e^{-C l}]^n
//! ```
//!
//! The leading factor is `E e^{-+l T_0}` and is dropped when the path starts
//! in `plus` (`T_0 = 0`). Everything is evaluated in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{a2_coefficient, analytic_constants, Regime, ValidatedModel};

fn check_rates(lambda_plus: f64, lambda_minus: f64) -> Result<()> {
    if !(lambda_plus.is_finite() && lambda_plus > 0.0 && lambda_minus.is_finite() && lambda_minus > 0.0) {
        return Err(Error::domain(format!(
            "intensities must be positive, got ({lambda_plus}, {lambda_minus})"
        )));
    }
    Ok(())
}

/// Per-cycle log factor of the deficit MGF.
fn ln_deficit_base(lambda: f64, centre: f64, lp: f64, lm: f64) -> f64 {
    -(lambda / lp).ln_1p() - (lambda / lm).ln_1p() + centre * lambda
}

fn ln_excess_base(lambda: f64, centre: f64, lp: f64, lm: f64) -> f64 {
    -(-lambda / lp).ln_1p() - (-lambda / lm).ln_1p() - centre * lambda
}

/// `ln E e^{lambda (centre n - T_2n)}`.
pub fn ln_mgf_deficit(
    lambda: f64,
    n: u64,
    centre: f64,
    lambda_plus: f64,
    lambda_minus: f64,
    start: Regime,
) -> Result<f64> {
    check_rates(lambda_plus, lambda_minus)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
    }
    let prefactor = match start {
        Regime::Minus => -(lambda / lambda_minus).ln_1p(),
        Regime::Plus => 0.0,
    };
    Ok(prefactor + n as f64 * ln_deficit_base(lambda, centre, lambda_plus, lambda_minus))
}

/// `ln E e^{lambda (T_2n - centre n)}`; finite only below `min(lambda_+, lambda_-)`.
pub fn ln_mgf_excess(
    lambda: f64,
    n: u64,
    centre: f64,
    lambda_plus: f64,
    lambda_minus: f64,
    start: Regime,
) -> Result<f64> {
    check_rates(lambda_plus, lambda_minus)?;
    let pole = lambda_plus.min(lambda_minus);
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
    }
    if lambda >= pole {
        return Err(Error::domain(format!(
            "lambda = {lambda} is at or beyond the pole min(lambda_+, lambda_-) = {pole}"
        )));
    }
    let prefactor = match start {
        Regime::Minus => -(-lambda / lambda_minus).ln_1p(),
        Regime::Plus => 0.0,
    };
    Ok(prefactor + n as f64 * ln_excess_base(lambda, centre, lambda_plus, lambda_minus))
}

/// `E e^{lambda (centre n - T_2n)}` for a path starting in `minus`.
pub fn mgf_deficit(lambda: f64, n: u64, centre: f64, lambda_plus: f64, lambda_minus: f64) -> Result<f64> {
    ln_mgf_deficit(lambda, n, centre, lambda_plus, lambda_minus, Regime::Minus).map(f64::exp)
}

/// `E e^{lambda (T_2n - centre n)}` for a path starting in `minus`.
pub fn mgf_excess(lambda: f64, n: u64, centre: f64, lambda_plus: f64, lambda_minus: f64) -> Result<f64> {
    ln_mgf_excess(lambda, n, centre, lambda_plus, lambda_minus, Regime::Minus).map(f64::exp)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailDirection {
    /// `P(T_2n / n - C < -eps)`
    LowerTail,
    /// `P(T_2n / n - C > eps)`
    UpperTail,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChernoffResult {
    /// Minimiser of the per-cycle decay factor.
    pub lambda_star: f64,
    /// Chernoff bound for the requested `n`, optimised over lambda with the
    /// `T_0` factor included.
    pub bound: f64,
    /// Optimal per-cycle factor: `bound <~ kappa^n` as `n` grows.
    pub kappa: f64,
    pub boundary_hit: bool,
}

pub const DEFAULT_LAMBDA_CAP: f64 = 1e3;

/// Optimised Chernoff bound on `T_2n / n` deviating from the mean cycle by
/// `epsilon`, for a path starting in `minus`.
pub fn chernoff_skeleton(
    direction: TailDirection,
    epsilon: f64,
    n: u64,
    lambda_plus: f64,
    lambda_minus: f64,
    lambda_cap: f64,
) -> Result<ChernoffResult> {
    chernoff_skeleton_from(direction, epsilon, n, lambda_plus, lambda_minus, lambda_cap, Regime::Minus)
}

pub fn chernoff_skeleton_from(
    direction: TailDirection,
    epsilon: f64,
    n: u64,
    lambda_plus: f64,
    lambda_minus: f64,
    lambda_cap: f64,
    start: Regime,
) -> Result<ChernoffResult> {
    check_rates(lambda_plus, lambda_minus)?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let centre = 1.0 / lambda_plus + 1.0 / lambda_minus;
    let (lp, lm) = (lambda_plus, lambda_minus);

    let cap = match direction {
        TailDirection::LowerTail => {
            if !(lambda_cap.is_finite() && lambda_cap > 0.0) {
                return Err(Error::domain(format!("lambda_cap must be positive, got {lambda_cap}")));
            }
            lambda_cap
        }
        TailDirection::UpperTail => lp.min(lm) * (1.0 - 1e-9),
    };

    let per_cycle = |l: f64| -> f64 {
        -l * epsilon
            + match direction {
                TailDirection::LowerTail => ln_deficit_base(l, centre, lp, lm),
                TailDirection::UpperTail => ln_excess_base(l, centre, lp, lm),
            }
    };
    let nf = n as f64;
    let whole = |l: f64| -> f64 {
        let ln_mgf = match direction {
            TailDirection::LowerTail => ln_mgf_deficit(l, n, centre, lp, lm, start),
            TailDirection::UpperTail => ln_mgf_excess(l, n, centre, lp, lm, start),
        };
        -l * epsilon * nf + ln_mgf.expect("lambda within (0, cap]")
    };

    let (lambda_star, ln_kappa) = minimize_on(per_cycle, 0.0, cap);
    let (_, ln_bound) = minimize_on(whole, 0.0, cap);
    Ok(ChernoffResult {
        lambda_star,
        bound: ln_bound.exp().min(1.0),
        kappa: ln_kappa.exp().min(1.0),
        boundary_hit: lambda_star == cap,
    })
}

const GOLDEN_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 256;

/// Minimises `f` on `[lo, hi]`: a coarse scan brackets the best grid cell,
/// golden-section search refines it, and the right endpoint is returned
/// verbatim when it is the best point.
pub(crate) fn minimize_on(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let step = (hi - lo) / SCAN_POINTS as f64;
    let x_at = |i: usize| if i == SCAN_POINTS { hi } else { lo + step * i as f64 };
    let (mut best_i, mut best_f) = (0, f(lo));
    for i in 1..=SCAN_POINTS {
        let v = f(x_at(i));
        if v < best_f {
            best_i = i;
            best_f = v;
        }
    }
    let end_value = f(hi);
    let a = x_at(best_i.saturating_sub(1));
    let b = x_at((best_i + 1).min(SCAN_POINTS));
    let (x, fx) = golden_section(&f, a, b, GOLDEN_TOL);
    if end_value <= fx && end_value <= best_f {
        return (hi, end_value);
    }
    if best_f < fx {
        (x_at(best_i), best_f)
    } else {
        (x, fx)
    }
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `(1 - a_2 lambda)^n`, the per-cycle geometric bound on
/// `E e^{-lambda (X_T2n - x) + a_hat lambda T_2n}`, with `a_2` taken from the
/// model via [`a2_coefficient`].
pub fn lemma2_bound(lambda: f64, a_hat: f64, n: u64, model: &ValidatedModel) -> Result<f64> {
    let s = model.spec();
    let consts = analytic_constants(model);
    if !(a_hat.is_finite() && a_hat >= 0.0 && a_hat < consts.a_hat_max) {
        return Err(Error::domain(format!(
            "a_hat = {a_hat} outside [0, {})",
            consts.a_hat_max
        )));
    }
    let a2 = a2_coefficient(a_hat, s.r_plus, s.r_minus, s.lambda_plus, s.lambda_minus).value;
    geometric_bound(a2, lambda, n)
}

/// `(1 - a2 lambda)^n` for a given `a2 > 0`.
pub fn geometric_bound(a2: f64, lambda: f64, n: u64) -> Result<f64> {
    if a2.is_nan() || a2 <= 0.0 {
        return Err(Error::domain(format!("a_2 must be positive, got {a2}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
    }
    if a2 * lambda >= 1.0 {
        return Err(Error::domain(format!("a_2 * lambda = {} must be < 1", a2 * lambda)));
    }
    Ok((n as f64 * (-a2 * lambda).ln_1p()).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted `d ln p / dt`; estimates `ln kappa`.
    pub slope: f64,
    pub intercept: f64,
    /// Sum of squared residuals.
    pub residual: f64,
    /// Total sum of squares of `ln p` about its mean.
    pub total_variation: f64,
}

/// Ordinary least squares of `ln p` on `t`.
pub fn decay_rate_fit(points: &[(f64, f64)]) -> Result<DecayFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(Error::DegenerateInput("non-finite point".into()));
    }
    let n = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("all t values are equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - t_mean) * (p.1 - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let residual = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let total_variation = points.iter().map(|p| (p.1 - y_mean).powi(2)).sum();
    Ok(DecayFit {
        slope,
        intercept,
        residual,
        total_variation,
    })
}
