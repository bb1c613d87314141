//! Deterministic parallel Monte Carlo.
//!
//! Sample `i` always draws from `Stream::derive(seed, i)`. Samples are cut
//! into fixed-size chunks; each chunk accumulates its moments sequentially
//! and chunks are merged in index order, so estimates are bit-identical for
//! any number of worker threads.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analytics::{
    chernoff_skeleton_from, decay_rate_fit, lemma2_bound, ln_mgf_deficit, ln_mgf_excess, ChernoffResult,
    DecayFit, TailDirection,
};
use crate::error::{Error, Result};
use crate::model::{analytic_constants, ValidatedModel};
use crate::path::{path_minimum, terminal_value, SimMethod};
use crate::rng::Stream;
use crate::skeleton::{sample_cycle_end, sample_skeleton, sample_skeleton_covering};

const CHUNK: u64 = 1024;

/// Default two-sided confidence level.
pub const DEFAULT_LEVEL: f64 = 0.999;
/// `|z|` above this flags an analytic value as contradicted.
pub const Z_THRESHOLD: f64 = 4.0;
/// Allowance on top of the geometric skeleton bound for its unquantified `o(lambda)` terms.
pub const DEFAULT_LEMMA2_SLACK: f64 = 0.05;
/// Fit quality required of the tail decay: residual / total variation.
pub const TAIL_RESIDUAL_RATIO: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    MeanOfReal,
    /// Mean of a 0/1 indicator; the interval is a Wilson score interval.
    Probability,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub kind: EstimateKind,
}

impl McEstimate {
    /// A single observation, reported with zero spread.
    pub fn single(value: f64) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            n_samples: 1,
            ci_low: value,
            ci_high: value,
            kind: EstimateKind::MeanOfReal,
        }
    }

    fn from_moments(m: Moments, kind: EstimateKind, level: f64) -> Self {
        let n = m.n as f64;
        let z = normal_quantile(level);
        match kind {
            EstimateKind::MeanOfReal => {
                let var = if m.n > 1 { m.m2 / (n - 1.0) } else { 0.0 };
                let se = (var / n).sqrt();
                Self {
                    mean: m.mean,
                    std_error: se,
                    n_samples: m.n,
                    ci_low: m.mean - z * se,
                    ci_high: m.mean + z * se,
                    kind,
                }
            }
            EstimateKind::Probability => {
                let p = m.mean;
                let se = (p * (1.0 - p) / n).sqrt();
                let (lo, hi) = wilson_interval(p, n, z);
                Self {
                    mean: p,
                    std_error: se,
                    n_samples: m.n,
                    ci_low: lo,
                    ci_high: hi,
                    kind,
                }
            }
        }
    }

    /// `(mean - reference) / std_error`; zero-spread estimates give 0 on an
    /// exact match and an infinite score otherwise.
    pub fn z_against(&self, reference: f64) -> f64 {
        let d = self.mean - reference;
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }
}

fn normal_quantile(level: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0)
}

/// Wilson score interval for `p` observed over `n` trials, clamped so it
/// always contains `p` and stays in `[0, 1]`.
pub fn wilson_interval(p: f64, n: f64, z: f64) -> (f64, f64) {
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if p == 0.0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let hi = if p == 1.0 { 1.0 } else { (centre + half).clamp(p, 1.0) };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb, nf) = (self.n as f64, other.n as f64, n as f64);
        Moments {
            n,
            mean: self.mean + d * nb / nf,
            m2: self.m2 + other.m2 + d * d * na * nb / nf,
        }
    }
}

/// Runs `sample` on streams `0..n_samples` under `master_seed`.
pub fn estimate_with<F>(n_samples: u64, master_seed: u64, kind: EstimateKind, level: f64, sample: F) -> Result<McEstimate>
where
    F: Fn(&mut Stream) -> Result<f64> + Sync,
{
    if n_samples < 2 {
        return Err(Error::domain(format!("n_samples must be at least 2, got {n_samples}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<Result<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::default();
            for index in c * CHUNK..((c + 1) * CHUNK).min(n_samples) {
                let mut stream = Stream::derive(master_seed, index);
                let fail = |source| Error::Sample {
                    index,
                    source: Box::new(source),
                };
                let v = sample(&mut stream).map_err(fail)?;
                if !v.is_finite() {
                    return Err(fail(Error::domain(format!("statistic is not finite ({v})"))));
                }
                if kind == EstimateKind::Probability && v != 0.0 && v != 1.0 {
                    return Err(fail(Error::domain(format!("indicator returned {v}"))));
                }
                m.push(v);
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::default();
    for part in parts {
        total = total.merge(part?);
    }
    Ok(McEstimate::from_moments(total, kind, level))
}

/// Statistic of one simulated skeleton or path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StatisticSpec {
    /// `T_2n / n`
    CycleRatio { n_cycles: usize },
    /// `e^{lambda (C n - T_2n)}` with `C` the mean cycle length.
    DeficitExponential { lambda: f64, n_cycles: usize },
    /// `e^{lambda (T_2n - C n)}`
    ExcessExponential { lambda: f64, n_cycles: usize },
    /// Indicator of `T_2n / n - C < -eps` (lower) or `> eps` (upper).
    CycleTail {
        direction: TailDirection,
        epsilon: f64,
        n_cycles: usize,
    },
    /// `(X_t - x0) / t`
    Velocity { horizon: f64 },
    /// `(X_{T_2n} - x0) / n`
    SkeletonVelocity { n_cycles: usize },
    /// `e^{-lambda (X_{T_2n} - x0) + a_hat lambda T_2n}`
    Lemma2Exponential { lambda: f64, a_hat: f64, n_cycles: usize },
    /// Indicator of `(X_t - x0) / t < threshold`.
    SpatialTail { horizon: f64, threshold: f64 },
    PathMinimum { horizon: f64 },
}

impl StatisticSpec {
    pub fn kind(&self) -> EstimateKind {
        match self {
            StatisticSpec::CycleTail { .. } | StatisticSpec::SpatialTail { .. } => EstimateKind::Probability,
            _ => EstimateKind::MeanOfReal,
        }
    }

    pub fn sample(&self, model: &ValidatedModel, method: SimMethod, rng: &mut Stream) -> Result<f64> {
        let x0 = model.spec().x0;
        let centre = || analytic_constants(model).mean_cycle;
        let indicator = |b: bool| if b { 1.0 } else { 0.0 };
        match *self {
            StatisticSpec::CycleRatio { n_cycles } => Ok(sample_cycle_end(model, n_cycles, rng)? / n_cycles as f64),
            StatisticSpec::DeficitExponential { lambda, n_cycles } => {
                let t = sample_cycle_end(model, n_cycles, rng)?;
                Ok((lambda * (centre() * n_cycles as f64 - t)).exp())
            }
            StatisticSpec::ExcessExponential { lambda, n_cycles } => {
                let t = sample_cycle_end(model, n_cycles, rng)?;
                Ok((lambda * (t - centre() * n_cycles as f64)).exp())
            }
            StatisticSpec::CycleTail {
                direction,
                epsilon,
                n_cycles,
            } => {
                let dev = sample_cycle_end(model, n_cycles, rng)? / n_cycles as f64 - centre();
                Ok(indicator(match direction {
                    TailDirection::LowerTail => dev < -epsilon,
                    TailDirection::UpperTail => dev > epsilon,
                }))
            }
            StatisticSpec::Velocity { horizon } => {
                let sk = sample_skeleton_covering(model, horizon, rng)?;
                Ok((terminal_value(method, model, &sk, horizon, rng)? - x0) / horizon)
            }
            StatisticSpec::SkeletonVelocity { n_cycles } => {
                let sk = sample_skeleton(model, n_cycles, rng)?;
                Ok((terminal_value(method, model, &sk, sk.end(), rng)? - x0) / n_cycles as f64)
            }
            StatisticSpec::Lemma2Exponential { lambda, a_hat, n_cycles } => {
                let sk = sample_skeleton(model, n_cycles, rng)?;
                let t = sk.end();
                let x = terminal_value(method, model, &sk, t, rng)?;
                Ok((-lambda * (x - x0) + a_hat * lambda * t).exp())
            }
            StatisticSpec::SpatialTail { horizon, threshold } => {
                let sk = sample_skeleton_covering(model, horizon, rng)?;
                let x = terminal_value(method, model, &sk, horizon, rng)?;
                Ok(indicator((x - x0) / horizon < threshold))
            }
            StatisticSpec::PathMinimum { horizon } => {
                let sk = sample_skeleton_covering(model, horizon, rng)?;
                path_minimum(method, model, &sk, horizon, rng)
            }
        }
    }
}

pub fn estimate(
    statistic: &StatisticSpec,
    model: &ValidatedModel,
    method: SimMethod,
    n_samples: u64,
    master_seed: u64,
) -> Result<McEstimate> {
    estimate_with(n_samples, master_seed, statistic.kind(), DEFAULT_LEVEL, |rng| {
        statistic.sample(model, method, rng)
    })
}

/// Seed for row `row` of a multi-row campaign under `master_seed`.
pub fn row_seed(master_seed: u64, row: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(master_seed ^ splitmix(row.wrapping_add(1)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    BoundHolds,
    BoundViolated,
    Inconclusive,
}

/// Analytic value next to its Monte Carlo estimate.
///
/// `threshold` holds whatever cutoff the verdict was decided against: the
/// tolerance of a law-of-large-numbers check, the slackened bound of an
/// upper-bound check, the bias allowance of a velocity check, or the event
/// threshold of a tail frequency.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub quantity: String,
    pub analytic: Option<f64>,
    pub estimate: McEstimate,
    pub z_score: Option<f64>,
    pub threshold: Option<f64>,
    pub verdict: Verdict,
}

/// `consistent` when `|z| <= 4`; otherwise the closed form is contradicted and
/// the row is `bound_violated`.
fn consistency(quantity: String, analytic: f64, estimate: McEstimate) -> BoundReport {
    let z = estimate.z_against(analytic);
    BoundReport {
        quantity,
        analytic: Some(analytic),
        estimate,
        z_score: Some(z),
        threshold: Some(Z_THRESHOLD),
        verdict: if z.abs() <= Z_THRESHOLD {
            Verdict::Consistent
        } else {
            Verdict::BoundViolated
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MgfFormula {
    /// `E e^{lambda (C n - T_2n)}`
    Deficit,
    /// `E e^{lambda (T_2n - C n)}`
    Excess,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MgfRow {
    pub formula: MgfFormula,
    pub lambda: f64,
    pub n: u64,
    pub outcome: Result<BoundReport>,
}

/// Closed-form MGFs of `T_2n` against Monte Carlo means, one row per
/// `(formula, lambda, n)`. Rows outside a formula's domain carry the error.
pub fn verify_mgf(
    model: &ValidatedModel,
    formulas: &[MgfFormula],
    lambdas: &[f64],
    ns: &[u64],
    n_samples: u64,
    master_seed: u64,
) -> Vec<MgfRow> {
    let s = model.spec();
    let centre = analytic_constants(model).mean_cycle;
    let mut rows = Vec::new();
    let mut row = 0u64;
    for &formula in formulas {
        for &lambda in lambdas {
            for &n in ns {
                let seed = row_seed(master_seed, row);
                row += 1;
                let outcome = (|| {
                    if n == 0 {
                        return Err(Error::domain("n must be at least 1"));
                    }
                    let (ln_analytic, stat, tag) = match formula {
                        MgfFormula::Deficit => (
                            ln_mgf_deficit(lambda, n, centre, s.lambda_plus, s.lambda_minus, s.z0)?,
                            StatisticSpec::DeficitExponential {
                                lambda,
                                n_cycles: n as usize,
                            },
                            "mgf_deficit",
                        ),
                        MgfFormula::Excess => (
                            ln_mgf_excess(lambda, n, centre, s.lambda_plus, s.lambda_minus, s.z0)?,
                            StatisticSpec::ExcessExponential {
                                lambda,
                                n_cycles: n as usize,
                            },
                            "mgf_excess",
                        ),
                    };
                    let est = estimate(&stat, model, SimMethod::Exact, n_samples, seed)?;
                    Ok(consistency(format!("{tag}[lambda={lambda},n={n}]"), ln_analytic.exp(), est))
                })();
                rows.push(MgfRow {
                    formula,
                    lambda,
                    n,
                    outcome,
                });
            }
        }
    }
    rows
}

/// Mean of `(X_t - x0)/t` against the renewal-reward velocity.
///
/// Starting in a fixed regime biases `E X_t` by at most
/// `|b_+ - b_-| / (lambda_+ + lambda_-)`, so the verdict allows
/// `4 SE + |b_+ - b_-| / ((lambda_+ + lambda_-) t)`; the reported `z` is the
/// plain score.
pub fn verify_velocity(
    model: &ValidatedModel,
    horizon: f64,
    method: SimMethod,
    n_samples: u64,
    master_seed: u64,
) -> Result<BoundReport> {
    let (bp, bm) = model.constant_drifts()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    let analytic = model.constant_drift_velocity()?;
    let est = estimate(&StatisticSpec::Velocity { horizon }, model, method, n_samples, master_seed)?;
    let s = model.spec();
    let allowance = (bp - bm).abs() / ((s.lambda_plus + s.lambda_minus) * horizon);
    let z = est.z_against(analytic);
    let ok = (est.mean - analytic).abs() <= Z_THRESHOLD * est.std_error + allowance;
    Ok(BoundReport {
        quantity: format!("velocity[t={horizon}]"),
        analytic: Some(analytic),
        estimate: est,
        z_score: Some(z),
        threshold: Some(allowance),
        verdict: if ok {
            Verdict::Consistent
        } else {
            Verdict::BoundViolated
        },
    })
}

/// `E e^{-lambda (X_T2n - x) + a_hat lambda T_2n}` against `(1 - a_2 lambda)^n`.
/// `bound_holds` iff the lower confidence limit is at most `bound * (1 + slack)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_lemma2(
    model: &ValidatedModel,
    lambda: f64,
    a_hat: f64,
    n: u64,
    method: SimMethod,
    n_samples: u64,
    master_seed: u64,
    slack: f64,
) -> Result<BoundReport> {
    if !(slack.is_finite() && slack >= 0.0) {
        return Err(Error::domain(format!("slack must be >= 0, got {slack}")));
    }
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let bound = lemma2_bound(lambda, a_hat, n, model)?;
    let est = estimate(
        &StatisticSpec::Lemma2Exponential {
            lambda,
            a_hat,
            n_cycles: n as usize,
        },
        model,
        method,
        n_samples,
        master_seed,
    )?;
    let cutoff = bound * (1.0 + slack);
    Ok(BoundReport {
        quantity: format!("lemma2[lambda={lambda},a_hat={a_hat},n={n}]"),
        analytic: Some(bound),
        z_score: Some(est.z_against(bound)),
        threshold: Some(cutoff),
        verdict: if est.ci_low <= cutoff {
            Verdict::BoundHolds
        } else {
            Verdict::BoundViolated
        },
        estimate: est,
    })
}

/// Empirical tail frequency of `T_2n/n` against the optimised Chernoff bound,
/// one row per `n`. `bound_holds` when the frequency is at most the bound,
/// `bound_violated` when even the lower confidence limit exceeds it.
#[allow(clippy::too_many_arguments)]
pub fn verify_chernoff(
    model: &ValidatedModel,
    direction: TailDirection,
    epsilon: f64,
    ns: &[u64],
    lambda_cap: f64,
    n_samples: u64,
    master_seed: u64,
) -> Result<Vec<(ChernoffResult, BoundReport)>> {
    let s = model.spec();
    let mut out = Vec::with_capacity(ns.len());
    for (row, &n) in ns.iter().enumerate() {
        let ch = chernoff_skeleton_from(direction, epsilon, n, s.lambda_plus, s.lambda_minus, lambda_cap, s.z0)?;
        let est = estimate(
            &StatisticSpec::CycleTail {
                direction,
                epsilon,
                n_cycles: n as usize,
            },
            model,
            SimMethod::Exact,
            n_samples,
            row_seed(master_seed, row as u64),
        )?;
        let verdict = if est.mean <= ch.bound {
            Verdict::BoundHolds
        } else if est.ci_low > ch.bound {
            Verdict::BoundViolated
        } else {
            Verdict::Inconclusive
        };
        let tag = match direction {
            TailDirection::LowerTail => "chernoff_lower_tail",
            TailDirection::UpperTail => "chernoff_upper_tail",
        };
        out.push((
            ch,
            BoundReport {
                quantity: format!("{tag}[eps={epsilon},n={n}]"),
                analytic: Some(ch.bound),
                estimate: est,
                z_score: None,
                threshold: Some(ch.bound),
                verdict,
            },
        ));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub rows: Vec<BoundReport>,
    pub fit: Option<DecayFit>,
    /// No horizon produced a single tail event.
    pub below_resolution: bool,
    pub verdict: Verdict,
}

/// Frequencies of `(X_t - x)/t - c0 < -eps` over the horizons, with a
/// log-linear decay fit.
///
/// The verdict is `consistent` when the fitted slope is negative and the
/// residual is under 10% of the total variation, or when every frequency is
/// zero (below resolution). Horizons with zero events are left out of the
/// fit. Fewer than three usable horizons, or frequencies all at least 1/2
/// (the event is typical rather than a deviation), give `inconclusive`.
#[allow(clippy::too_many_arguments)]
pub fn verify_spatial_tail(
    model: &ValidatedModel,
    c0: f64,
    epsilon: f64,
    horizons: &[f64],
    method: SimMethod,
    n_samples: u64,
    master_seed: u64,
) -> Result<TailReport> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if !c0.is_finite() {
        return Err(Error::domain("c0 must be finite"));
    }
    if horizons.len() < 3 {
        return Err(Error::domain("need at least 3 horizons"));
    }
    let threshold = c0 - epsilon;
    let mut estimates = Vec::with_capacity(horizons.len());
    for (row, &horizon) in horizons.iter().enumerate() {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        let est = estimate(
            &StatisticSpec::SpatialTail { horizon, threshold },
            model,
            method,
            n_samples,
            row_seed(master_seed, row as u64),
        )?;
        estimates.push(est);
    }

    let points: Vec<(f64, f64)> = horizons
        .iter()
        .zip(&estimates)
        .filter(|(_, e)| e.mean > 0.0)
        .map(|(&t, e)| (t, e.mean.ln()))
        .collect();
    let below_resolution = points.is_empty();
    let typical = estimates.iter().all(|e| e.mean >= 0.5);
    let fit = if points.len() >= 3 {
        Some(decay_rate_fit(&points)?)
    } else {
        None
    };
    let verdict = if below_resolution {
        Verdict::Consistent
    } else if typical {
        Verdict::Inconclusive
    } else {
        match fit {
            Some(f) if f.slope < 0.0 && f.residual < TAIL_RESIDUAL_RATIO * f.total_variation => Verdict::Consistent,
            _ => Verdict::Inconclusive,
        }
    };

    let rows = horizons
        .iter()
        .zip(estimates)
        .map(|(&t, est)| BoundReport {
            quantity: format!("spatial_tail[t={t}]"),
            analytic: fit.map(|f| (f.intercept + f.slope * t).exp()),
            estimate: est,
            z_score: None,
            threshold: Some(threshold),
            verdict,
        })
        .collect();
    Ok(TailReport {
        rows,
        fit,
        below_resolution,
        verdict,
    })
}
