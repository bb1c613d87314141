//! The regime process: exponential holding times and the switching times
//! `T_0 < T_1 < T_2 < ...`.
//!
//! `T_0` is the first entry into regime `plus` (zero when starting there),
//! and regimes alternate at every later switch, so `T_{2k}` always closes a
//! full plus/minus cycle.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{analytic_constants, Regime, ValidatedModel};
use crate::montecarlo::{BoundReport, McEstimate, Verdict};
use crate::rng::RandomSource;

/// `-ln(u) / rate`, the inverse-CDF draw from `Exp(rate)`.
pub fn sample_holding_time(rate: f64, u: f64) -> Result<f64> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::domain(format!("rate must be positive, got {rate}")));
    }
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::domain(format!("uniform draw must lie in (0, 1], got {u}")));
    }
    // -ln(1) is -0.0; keep the sign clean.
    Ok(-u.ln() / rate + 0.0)
}

#[inline]
fn draw(rate: f64, rng: &mut impl RandomSource) -> f64 {
    -rng.uniform().ln() / rate + 0.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    t0: f64,
    switch_times: Vec<f64>,
    initial_regime: Regime,
}

impl Skeleton {
    pub fn new(t0: f64, switch_times: Vec<f64>, initial_regime: Regime) -> Result<Self> {
        if !(t0.is_finite() && t0 >= 0.0) {
            return Err(Error::MalformedSkeleton(format!("t0 = {t0} must be finite and >= 0")));
        }
        match initial_regime {
            Regime::Plus if t0 != 0.0 => {
                return Err(Error::MalformedSkeleton("t0 must be 0 when starting in plus".into()))
            }
            Regime::Minus if t0 == 0.0 => {
                return Err(Error::MalformedSkeleton("t0 must be > 0 when starting in minus".into()))
            }
            _ => {}
        }
        let mut prev = t0;
        for &t in &switch_times {
            if !(t.is_finite() && t > prev) {
                return Err(Error::MalformedSkeleton(format!(
                    "switch times must be finite and strictly increasing ({t} after {prev})"
                )));
            }
            prev = t;
        }
        Ok(Self {
            t0,
            switch_times,
            initial_regime,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// `T_1, T_2, ...`
    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    pub fn initial_regime(&self) -> Regime {
        self.initial_regime
    }

    /// Number of complete cycles after `T_0`.
    pub fn full_cycles(&self) -> usize {
        self.switch_times.len() / 2
    }

    /// `T_{2k}`, with `T_0` for `k = 0`.
    pub fn cycle_end(&self, k: usize) -> Option<f64> {
        match k {
            0 => Some(self.t0),
            _ => self.switch_times.get(2 * k - 1).copied(),
        }
    }

    /// Last time at which the regime path is known.
    pub fn end(&self) -> f64 {
        self.switch_times.last().copied().unwrap_or(self.t0)
    }

    /// Every regime change as `(time, regime_after)`, starting with the entry
    /// into `plus` at `T_0` (at time 0 when the path starts there).
    pub fn events(&self) -> impl Iterator<Item = (f64, Regime)> + '_ {
        std::iter::once((self.t0, Regime::Plus)).chain(
            self.switch_times
                .iter()
                .enumerate()
                .map(|(i, &t)| (t, if i % 2 == 0 { Regime::Minus } else { Regime::Plus })),
        )
    }

    /// Regime in force at time `t` (paths are right-continuous).
    pub fn regime_at(&self, t: f64) -> Regime {
        if t < self.t0 {
            return Regime::Minus;
        }
        let k = self.switch_times.partition_point(|&s| s <= t);
        if k % 2 == 0 {
            Regime::Plus
        } else {
            Regime::Minus
        }
    }

    /// CSV with columns `index,time,regime_after`; row 0 is `T_0`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "time", "regime_after"])?;
        for (i, (t, r)) in self.events().enumerate() {
            out.write_record([i.to_string(), t.to_string(), r.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn initial_delay(model: &ValidatedModel, rng: &mut impl RandomSource) -> f64 {
    match model.spec().z0 {
        Regime::Plus => 0.0,
        Regime::Minus => draw(model.spec().lambda_minus, rng),
    }
}

/// Samples `T_0` and `n_cycles` full plus/minus cycles after it.
pub fn sample_skeleton(
    model: &ValidatedModel,
    n_cycles: usize,
    rng: &mut impl RandomSource,
) -> Result<Skeleton> {
    if n_cycles == 0 {
        return Err(Error::domain("n_cycles must be at least 1"));
    }
    let (lp, lm) = (model.spec().lambda_plus, model.spec().lambda_minus);
    let t0 = initial_delay(model, rng);
    let mut times = Vec::with_capacity(2 * n_cycles);
    let mut t = t0;
    for _ in 0..n_cycles {
        t += draw(lp, rng);
        times.push(t);
        t += draw(lm, rng);
        times.push(t);
    }
    Ok(Skeleton {
        t0,
        switch_times: times,
        initial_regime: model.spec().z0,
    })
}

/// `T_{2n}` alone, consuming the stream exactly as [`sample_skeleton`] does.
pub fn sample_cycle_end(
    model: &ValidatedModel,
    n_cycles: usize,
    rng: &mut impl RandomSource,
) -> Result<f64> {
    if n_cycles == 0 {
        return Err(Error::domain("n_cycles must be at least 1"));
    }
    let (lp, lm) = (model.spec().lambda_plus, model.spec().lambda_minus);
    let mut t = initial_delay(model, rng);
    for _ in 0..n_cycles {
        t += draw(lp, rng);
        t += draw(lm, rng);
    }
    Ok(t)
}

/// Samples whole cycles until the skeleton reaches `horizon` (at least one).
pub fn sample_skeleton_covering(
    model: &ValidatedModel,
    horizon: f64,
    rng: &mut impl RandomSource,
) -> Result<Skeleton> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::domain(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    let (lp, lm) = (model.spec().lambda_plus, model.spec().lambda_minus);
    let t0 = initial_delay(model, rng);
    let mean_cycle = 1.0 / lp + 1.0 / lm;
    let guess = ((horizon - t0).max(0.0) / mean_cycle * 1.1) as usize + 2;
    let mut times = Vec::with_capacity(2 * guess);
    let mut t = t0;
    loop {
        t += draw(lp, rng);
        times.push(t);
        t += draw(lm, rng);
        times.push(t);
        if t >= horizon {
            break;
        }
    }
    Ok(Skeleton {
        t0,
        switch_times: times,
        initial_regime: model.spec().z0,
    })
}

/// `T_{2n} / n` over the skeleton's full cycles.
pub fn cycle_statistic(skeleton: &Skeleton) -> Result<f64> {
    let n = skeleton.full_cycles();
    if n == 0 {
        return Err(Error::EmptySkeleton);
    }
    Ok(skeleton.switch_times[2 * n - 1] / n as f64)
}

/// One long skeleton: compares `T_{2n}/n` with the mean cycle length.
pub fn lln_check(
    model: &ValidatedModel,
    n: usize,
    tolerance: f64,
    rng: &mut impl RandomSource,
) -> Result<BoundReport> {
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tolerance}")));
    }
    let target = analytic_constants(model).mean_cycle;
    let stat = sample_cycle_end(model, n, rng)? / n as f64;
    let verdict = if (stat - target).abs() < tolerance {
        Verdict::Consistent
    } else {
        Verdict::BoundViolated
    };
    Ok(BoundReport {
        quantity: format!("cycle_lln[n={n}]"),
        analytic: Some(target),
        estimate: McEstimate::single(stat),
        z_score: None,
        threshold: Some(tolerance),
        verdict,
    })
}
