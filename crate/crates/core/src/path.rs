//! Paths of `X` driven by a fixed [`Skeleton`].
//!
//! Two integrators share one contract: every switch time up to the horizon is
//! a node of the path, and the regime only changes at those nodes.
//!
//! * [`simulate_exact_constant`] uses the Gaussian transition
//!   `X_t = X_s + b (t - s) + N(0, t - s)` between consecutive switches.
//! * [`simulate_em`] runs Euler–Maruyama on the grid `k * dt`, with each step
//!   cut short at any switch time it would cross.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Regime, ValidatedModel};
use crate::rng::RandomSource;
use crate::skeleton::Skeleton;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<f64>,
    skeleton: Skeleton,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn x0(&self) -> f64 {
        self.values[0]
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("trajectory holds at least one point")
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("trajectory holds at least one point")
    }

    /// Value stored at exactly time `t`, if `t` is a node.
    pub fn value_at_node(&self, t: f64) -> Option<f64> {
        let i = self.times.partition_point(|&s| s < t);
        (i < self.times.len() && self.times[i] == t).then(|| self.values[i])
    }

    /// CSV with columns `time,x,regime`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "x", "regime"])?;
        for (&t, &x) in self.times.iter().zip(&self.values) {
            out.write_record([t.to_string(), x.to_string(), self.skeleton.regime_at(t).to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Integration scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method", deny_unknown_fields)]
pub enum SimMethod {
    Exact,
    #[serde(rename = "em")]
    EulerMaruyama { dt: f64 },
}

fn check_horizon(skeleton: &Skeleton, horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    if horizon > skeleton.end() {
        return Err(Error::HorizonBeyondSkeleton {
            horizon,
            end: skeleton.end(),
        });
    }
    Ok(())
}

fn exact_into(
    model: &ValidatedModel,
    skeleton: &Skeleton,
    horizon: f64,
    rng: &mut impl RandomSource,
    mut sink: impl FnMut(f64, f64),
) -> Result<()> {
    let (bp, bm) = model.constant_drifts()?;
    check_horizon(skeleton, horizon)?;
    let drift = |r: Regime| match r {
        Regime::Plus => bp,
        Regime::Minus => bm,
    };

    let mut t = 0.0;
    let mut x = model.spec().x0;
    let mut regime = skeleton.regime_at(0.0);
    sink(t, x);
    for (s, after) in skeleton.events() {
        if s <= 0.0 {
            continue;
        }
        let end = s.min(horizon);
        let h = end - t;
        x += drift(regime) * h + h.sqrt() * rng.standard_normal();
        t = end;
        sink(t, x);
        if end >= horizon {
            return Ok(());
        }
        regime = after;
    }
    unreachable!("horizon checked against skeleton end")
}

fn em_into(
    model: &ValidatedModel,
    skeleton: &Skeleton,
    dt: f64,
    horizon: f64,
    rng: &mut impl RandomSource,
    mut sink: impl FnMut(f64, f64),
) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    check_horizon(skeleton, horizon)?;

    let mut events = skeleton.events().filter(|&(s, _)| s > 0.0).peekable();
    let mut regime = skeleton.regime_at(0.0);
    let mut drift = model.drift(regime);
    let mut t = 0.0;
    let mut x = model.spec().x0;
    let mut k: u64 = 1;
    sink(t, x);
    loop {
        let grid = k as f64 * dt;
        let switch = events.peek().map_or(f64::INFINITY, |e| e.0);
        let next = grid.min(switch).min(horizon);
        let h = next - t;
        let b = drift.eval(x);
        if !b.is_finite() {
            return Err(Error::NonFiniteDrift { t, x, value: b });
        }
        x += b * h + h.sqrt() * rng.standard_normal();
        t = next;
        if grid <= next {
            k += 1;
        }
        if switch <= next {
            regime = events.next().expect("peeked").1;
            drift = model.drift(regime);
        }
        sink(t, x);
        if t >= horizon {
            return Ok(());
        }
    }
}

fn collect(
    skeleton: &Skeleton,
    run: impl FnOnce(&mut dyn FnMut(f64, f64)) -> Result<()>,
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    run(&mut |t, x| {
        times.push(t);
        values.push(x);
    })?;
    Ok(Trajectory {
        times,
        values,
        skeleton: skeleton.clone(),
    })
}

/// Exact Gaussian transitions; both drifts must be constant.
pub fn simulate_exact_constant(
    model: &ValidatedModel,
    skeleton: &Skeleton,
    horizon: f64,
    rng: &mut impl RandomSource,
) -> Result<Trajectory> {
    collect(skeleton, |sink| exact_into(model, skeleton, horizon, rng, sink))
}

/// Switch-aligned Euler–Maruyama with nominal step `dt`.
pub fn simulate_em(
    model: &ValidatedModel,
    skeleton: &Skeleton,
    dt: f64,
    horizon: f64,
    rng: &mut impl RandomSource,
) -> Result<Trajectory> {
    collect(skeleton, |sink| em_into(model, skeleton, dt, horizon, rng, sink))
}

pub fn simulate(
    method: SimMethod,
    model: &ValidatedModel,
    skeleton: &Skeleton,
    horizon: f64,
    rng: &mut impl RandomSource,
) -> Result<Trajectory> {
    match method {
        SimMethod::Exact => simulate_exact_constant(model, skeleton, horizon, rng),
        SimMethod::EulerMaruyama { dt } => simulate_em(model, skeleton, dt, horizon, rng),
    }
}

/// `X` at the horizon without storing the path. Consumes the stream exactly
/// like [`simulate`].
pub fn terminal_value(
    method: SimMethod,
    model: &ValidatedModel,
    skeleton: &Skeleton,
    horizon: f64,
    rng: &mut impl RandomSource,
) -> Result<f64> {
    let mut last = f64::NAN;
    let sink = |_t: f64, x: f64| last = x;
    match method {
        SimMethod::Exact => exact_into(model, skeleton, horizon, rng, sink)?,
        SimMethod::EulerMaruyama { dt } => em_into(model, skeleton, dt, horizon, rng, sink)?,
    }
    Ok(last)
}

/// Minimum of `X` over the path nodes, without storing the path.
pub fn path_minimum(
    method: SimMethod,
    model: &ValidatedModel,
    skeleton: &Skeleton,
    horizon: f64,
    rng: &mut impl RandomSource,
) -> Result<f64> {
    let mut min = f64::INFINITY;
    let sink = |_t: f64, x: f64| min = min.min(x);
    match method {
        SimMethod::Exact => exact_into(model, skeleton, horizon, rng, sink)?,
        SimMethod::EulerMaruyama { dt } => em_into(model, skeleton, dt, horizon, rng, sink)?,
    }
    Ok(min)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// `(X_horizon - x0) / horizon`
    VelocityAtHorizon,
    /// `(X_{T_2n} - x0) / n` for the last cycle end `T_2n` inside the path.
    SkeletonVelocity,
    MinOverPath,
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "velocity_at_horizon" => Ok(Self::VelocityAtHorizon),
            "skeleton_velocity" => Ok(Self::SkeletonVelocity),
            "min_over_path" => Ok(Self::MinOverPath),
            other => Err(Error::UnknownStatistic(other.to_string())),
        }
    }
}

pub fn statistic_at(traj: &Trajectory, kind: StatisticKind) -> Result<f64> {
    match kind {
        StatisticKind::VelocityAtHorizon => {
            let h = traj.horizon();
            if h <= 0.0 {
                return Err(Error::DegenerateInput("trajectory has zero length".into()));
            }
            Ok((traj.terminal() - traj.x0()) / h)
        }
        StatisticKind::SkeletonVelocity => {
            let sk = traj.skeleton();
            let h = traj.horizon();
            let n = (1..=sk.full_cycles())
                .take_while(|&k| sk.cycle_end(k).is_some_and(|t| t <= h))
                .last()
                .ok_or(Error::EmptySkeleton)?;
            let t = sk.cycle_end(n).expect("cycle exists");
            let x = traj
                .value_at_node(t)
                .expect("switch times are always path nodes");
            Ok((x - traj.x0()) / n as f64)
        }
        StatisticKind::MinOverPath => Ok(traj.values.iter().copied().fold(f64::INFINITY, f64::min)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Node {
    t: f64,
    /// Brownian increment since the previous node.
    dw: f64,
    grid: Option<u64>,
    switch_to: Option<Regime>,
}

/// Brownian increments on the finest switch-aligned grid, shared by coarser
/// Euler–Maruyama runs so their errors can be compared path by path.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    dt: f64,
    horizon: f64,
    nodes: Vec<Node>,
}

impl BrownianPath {
    pub fn sample(
        skeleton: &Skeleton,
        dt: f64,
        horizon: f64,
        rng: &mut impl RandomSource,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::NonPositiveStep(dt));
        }
        check_horizon(skeleton, horizon)?;
        let mut events = skeleton.events().filter(|&(s, _)| s > 0.0).peekable();
        let mut nodes = Vec::new();
        let mut t = 0.0;
        let mut k: u64 = 1;
        while t < horizon {
            let grid = k as f64 * dt;
            let switch = events.peek().map_or(f64::INFINITY, |e| e.0);
            let next = grid.min(switch).min(horizon);
            let h = next - t;
            let mut node = Node {
                t: next,
                dw: h.sqrt() * rng.standard_normal(),
                grid: None,
                switch_to: None,
            };
            if grid <= next {
                node.grid = Some(k);
                k += 1;
            }
            if switch <= next {
                node.switch_to = Some(events.next().expect("peeked").1);
            }
            nodes.push(node);
            t = next;
        }
        Ok(Self { dt, horizon, nodes })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// Euler–Maruyama with step `stride * path.dt()`, driven by the increments in
/// `path`. `stride = 1` reproduces [`simulate_em`] on the same draws.
pub fn simulate_em_coupled(
    model: &ValidatedModel,
    skeleton: &Skeleton,
    path: &BrownianPath,
    stride: u64,
) -> Result<Trajectory> {
    if stride == 0 {
        return Err(Error::NonPositiveStep(0.0));
    }
    let mut regime = skeleton.regime_at(0.0);
    let mut t = 0.0;
    let mut x = model.spec().x0;
    let mut dw = 0.0;
    let mut times = vec![t];
    let mut values = vec![x];
    let last = path.nodes.len().saturating_sub(1);
    for (i, node) in path.nodes.iter().enumerate() {
        dw += node.dw;
        let coarse = node.switch_to.is_some()
            || node.grid.is_some_and(|k| k % stride == 0)
            || i == last;
        if !coarse {
            continue;
        }
        let b = model.drift(regime).eval(x);
        if !b.is_finite() {
            return Err(Error::NonFiniteDrift { t, x, value: b });
        }
        x += b * (node.t - t) + dw;
        dw = 0.0;
        t = node.t;
        if let Some(r) = node.switch_to {
            regime = r;
        }
        times.push(t);
        values.push(x);
    }
    Ok(Trajectory {
        times,
        values,
        skeleton: skeleton.clone(),
    })
}
