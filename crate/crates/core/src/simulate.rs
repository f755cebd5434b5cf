//! Path generation: full-truncation Euler steps for drift and diffusion,
//! thinned positive jumps, exact multiplicative catastrophes, and detection of
//! absorption and explosion.
//!
//! Each path draws from its own ChaCha8 stream selected by `(seed, path_index)`,
//! so a path is a pure function of its arguments.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::criteria::GaEvaluator;
use crate::error::{domain, invalid, Error, Result};
use crate::model::{JumpSampler, KernelSampler, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub x_abs: f64,
    pub x_max: f64,
    /// Largest allowed `(p m0 + r) h` before a step is halved.
    pub rate_cap_factor: f64,
    pub seed: u64,
    /// Keep every k-th grid step in a [`PathRecord`]. Not part of the scheme.
    #[serde(skip)]
    pub decimation: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_max: 10.0,
            x_abs: 1e-9,
            x_max: 1e12,
            rate_cap_factor: 0.1,
            seed: 0,
            decimation: 1,
        }
    }
}

impl SimConfig {
    pub fn with_horizon(t_max: f64) -> Self {
        Self {
            t_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("sim.dt", format!("must be positive and finite, got {}", self.dt)));
        }
        if !(self.t_max > self.dt && self.t_max.is_finite()) {
            return Err(invalid("sim.t_max", format!("must be finite and exceed dt, got {}", self.t_max)));
        }
        if !(self.x_abs >= 0.0) {
            return Err(invalid("sim.x_abs", format!("must be >= 0, got {}", self.x_abs)));
        }
        if !(self.x_max > self.x_abs) {
            return Err(invalid("sim.x_max", format!("must exceed x_abs, got {}", self.x_max)));
        }
        if !(self.rate_cap_factor > 0.0 && self.rate_cap_factor <= 1.0) {
            return Err(invalid(
                "sim.rate_cap_factor",
                format!("must lie in (0, 1], got {}", self.rate_cap_factor),
            ));
        }
        if self.decimation == 0 {
            return Err(invalid("output.decimation", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of grid steps up to the horizon.
    pub fn steps(&self) -> u64 {
        (self.t_max / self.dt - 1e-9).ceil() as u64
    }

    /// Time of grid step `i`.
    pub fn grid_time(&self, i: u64) -> f64 {
        (i as f64 * self.dt).min(self.t_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Catastrophe { theta: f64 },
    PositiveJump { z: f64 },
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Catastrophe { .. } => "catastrophe",
            EventKind::PositiveJump { .. } => "posjump",
        }
    }

    pub fn magnitude(&self) -> f64 {
        match *self {
            EventKind::Catastrophe { theta } => theta,
            EventKind::PositiveJump { z } => z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Absorbed { time: f64 },
    Exploded { time: f64 },
    RanToHorizon,
    /// An observer ended the path early. Never stored in a [`PathRecord`].
    Stopped { time: f64 },
}

impl Outcome {
    pub fn absorbed_by(&self, t: f64) -> bool {
        matches!(*self, Outcome::Absorbed { time } if time <= t)
    }

    pub fn exploded_by(&self, t: f64) -> bool {
        matches!(*self, Outcome::Exploded { time } if time <= t)
    }
}

/// One completed substep, or the initial state (`h = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    pub time: f64,
    pub state: f64,
    /// Length of the substep that ended here.
    pub h: f64,
    /// Grid steps completed so far.
    pub step: u64,
    /// Whether `time` is a grid time `step * dt` (or the horizon).
    pub on_grid: bool,
}

/// Receives the full-resolution stream of a path.
pub trait Observer {
    /// Return `false` to stop the path here.
    fn tick(&mut self, tick: &Tick) -> bool;

    fn event(&mut self, _event: &Event) {}
}

/// Simulate one path, feeding every substep and event to `obs`.
pub fn simulate_with<O: Observer + ?Sized>(
    m: &ModelSpec,
    cfg: &SimConfig,
    x0: f64,
    path_index: u64,
    obs: &mut O,
) -> Result<Outcome> {
    cfg.validate()?;
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(domain("simulate_path", format!("x0 must be finite and >= 0, got {x0}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path_index);

    let jf = m.jump_functionals();
    let jumps: Option<JumpSampler> = m.pi().sampler();
    let (m0, m1) = if jumps.is_some() { (jf.m0, jf.finite_m1()?) } else { (0.0, 0.0) };
    let kernel: Option<KernelSampler> = (!m.kappa().is_identity()).then(|| m.kappa().sampler());
    let has_noise = !m.sigma2().is_zero();
    let has_jumps = jumps.is_some() && !m.p().is_zero();
    let has_catastrophes = kernel.is_some() && !m.r().is_zero();

    let mut x = x0;
    let mut t = 0.0;
    let mut tick = Tick {
        time: 0.0,
        state: x0,
        h: 0.0,
        step: 0,
        on_grid: true,
    };
    if x <= cfg.x_abs {
        tick.state = 0.0;
        obs.tick(&tick);
        return Ok(Outcome::Absorbed { time: 0.0 });
    }
    if x >= cfg.x_max {
        obs.tick(&tick);
        return Ok(Outcome::Exploded { time: 0.0 });
    }
    if !obs.tick(&tick) {
        return Ok(Outcome::Stopped { time: 0.0 });
    }
    let steps = cfg.steps();
    for step in 1..=steps {
        let t_next = cfg.grid_time(step);
        while t < t_next {
            let g = m.g().eval(x);
            let p = if has_jumps { m.p().eval(x) } else { 0.0 };
            let r = if has_catastrophes { m.r().eval(x) } else { 0.0 };
            let jump_rate = p * m0;
            let total = jump_rate + r;
            let mut h = cfg.dt;
            let mut halvings = 0;
            while total * h > cfg.rate_cap_factor && halvings < 200 {
                h *= 0.5;
                halvings += 1;
            }
            let remaining = t_next - t;
            let last = h >= remaining * (1.0 - 1e-9);
            if last {
                h = remaining;
            }

            let mut y = x + (g - p * m1) * h;
            if has_noise {
                let s2 = m.sigma2().eval(x).max(0.0);
                if s2 > 0.0 {
                    let xi: f64 = rng.sample(StandardNormal);
                    y += (2.0 * s2 * h).sqrt() * xi;
                }
            }
            if y < 0.0 {
                y = 0.0;
            }
            let t_end = if last { t_next } else { t + h };
            if jump_rate > 0.0 && rng.random::<f64>() < jump_rate * h {
                let z = jumps.as_ref().expect("jump sampler").sample(&mut rng);
                let e = Event {
                    time: t_end,
                    kind: EventKind::PositiveJump { z },
                    before: y,
                    after: y + z,
                };
                y = e.after;
                obs.event(&e);
            }
            if r > 0.0 && rng.random::<f64>() < r * h {
                let theta = kernel.as_ref().expect("kernel sampler").sample(&mut rng);
                let e = Event {
                    time: t_end,
                    kind: EventKind::Catastrophe { theta },
                    before: y,
                    after: theta * y,
                };
                y = e.after;
                obs.event(&e);
            }
            if !y.is_finite() {
                return Err(Error::NonFiniteState { path_index, time: t_end });
            }
            x = y;
            t = t_end;
            tick = Tick {
                time: t,
                state: x,
                h,
                step: if last { step } else { step - 1 },
                on_grid: last,
            };
            if x <= cfg.x_abs {
                tick.state = 0.0;
                obs.tick(&tick);
                return Ok(Outcome::Absorbed { time: t });
            }
            if x >= cfg.x_max {
                obs.tick(&tick);
                return Ok(Outcome::Exploded { time: t });
            }
            if !obs.tick(&tick) {
                return Ok(Outcome::Stopped { time: t });
            }
        }
    }
    Ok(Outcome::RanToHorizon)
}

/// A stored trajectory.
///
/// `times`/`states` hold every `decimation`-th grid point plus the terminal
/// point. An absorbed path ends with `(τ, 0)` and is 0 from then on; an
/// exploded path ends at the explosion time. `minima`/`maxima` list the
/// successive running-minimum and running-maximum records of the
/// full-resolution stream, which is what [`hitting_times`] reads.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub events: Vec<Event>,
    pub outcome: Outcome,
    /// `(a, ∫₀^end G_a(X_s) ds)` by left sums on the full-resolution stream.
    pub ga_integral: Vec<(f64, f64)>,
    pub minima: Vec<(f64, f64)>,
    pub maxima: Vec<(f64, f64)>,
}

impl PathRecord {
    /// State at time `t` (last recorded value at or before `t`).
    pub fn state_at(&self, t: f64) -> Option<f64> {
        if t < 0.0 {
            return None;
        }
        if let Outcome::Absorbed { time } = self.outcome {
            if t >= time {
                return Some(0.0);
            }
        }
        if let Outcome::Exploded { time } = self.outcome {
            if t >= time {
                return Some(f64::INFINITY);
            }
        }
        let i = self.times.partition_point(|&s| s <= t);
        i.checked_sub(1).map(|i| self.states[i])
    }

    pub fn final_state(&self) -> f64 {
        *self.states.last().expect("a path has at least its initial state")
    }
}

struct Recorder<'m> {
    decimation: u64,
    times: Vec<f64>,
    states: Vec<f64>,
    events: Vec<Event>,
    minima: Vec<(f64, f64)>,
    maxima: Vec<(f64, f64)>,
    ga: Vec<GaEvaluator<'m>>,
    ga_sum: Vec<f64>,
    ga_error: Option<Error>,
    prev: f64,
    last: Tick,
}

impl Observer for Recorder<'_> {
    fn tick(&mut self, tick: &Tick) -> bool {
        if tick.h > 0.0 {
            for (e, s) in self.ga.iter().zip(self.ga_sum.iter_mut()) {
                match e.value(self.prev) {
                    Ok(v) => *s += v * tick.h,
                    Err(err) => {
                        self.ga_error.get_or_insert(err);
                    }
                }
            }
        }
        let x = tick.state;
        if self.minima.last().is_none_or(|&(_, m)| x < m) {
            self.minima.push((tick.time, x));
        }
        if self.maxima.last().is_none_or(|&(_, m)| x > m) {
            self.maxima.push((tick.time, x));
        }
        if tick.on_grid && tick.step.is_multiple_of(self.decimation) {
            self.times.push(tick.time);
            self.states.push(x);
        }
        self.prev = x;
        self.last = *tick;
        self.ga_error.is_none()
    }

    fn event(&mut self, event: &Event) {
        self.events.push(*event);
    }
}

pub fn simulate_path(m: &ModelSpec, cfg: &SimConfig, x0: f64, path_index: u64) -> Result<PathRecord> {
    simulate_path_with_ga(m, cfg, x0, path_index, &[])
}

/// [`simulate_path`] that also accumulates `∫ G_a(X_s) ds` for each `a`.
pub fn simulate_path_with_ga(
    m: &ModelSpec,
    cfg: &SimConfig,
    x0: f64,
    path_index: u64,
    a_values: &[f64],
) -> Result<PathRecord> {
    let ga = a_values
        .iter()
        .map(|&a| GaEvaluator::new(m, a))
        .collect::<Result<Vec<_>>>()?;
    let mut rec = Recorder {
        decimation: cfg.decimation.max(1),
        times: Vec::new(),
        states: Vec::new(),
        events: Vec::new(),
        minima: Vec::new(),
        maxima: Vec::new(),
        ga_sum: vec![0.0; ga.len()],
        ga,
        ga_error: None,
        prev: x0,
        last: Tick {
            time: 0.0,
            state: x0,
            h: 0.0,
            step: 0,
            on_grid: true,
        },
    };
    let outcome = simulate_with(m, cfg, x0, path_index, &mut rec)?;
    if let Some(e) = rec.ga_error {
        return Err(e);
    }
    if rec.times.last() != Some(&rec.last.time) {
        rec.times.push(rec.last.time);
        rec.states.push(rec.last.state);
    }
    Ok(PathRecord {
        times: rec.times,
        states: rec.states,
        events: rec.events,
        outcome,
        ga_integral: a_values.iter().copied().zip(rec.ga_sum).collect(),
        minima: rec.minima,
        maxima: rec.maxima,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingTimes {
    /// First time strictly below the lower level.
    pub tau_minus: Option<f64>,
    /// First time strictly above the upper level.
    pub tau_plus: Option<f64>,
}

pub fn hitting_times(p: &PathRecord, lower: Option<f64>, upper: Option<f64>) -> HittingTimes {
    let tau_minus = lower.and_then(|l| p.minima.iter().find(|&&(_, x)| x < l).map(|&(t, _)| t));
    let mut tau_plus = upper.and_then(|u| p.maxima.iter().find(|&&(_, x)| x > u).map(|&(t, _)| t));
    if let (Some(u), Outcome::Exploded { time }) = (upper, p.outcome) {
        if tau_plus.is_none() && p.final_state() >= u {
            tau_plus = Some(time);
        }
    }
    HittingTimes { tau_minus, tau_plus }
}

/// Left-endpoint sums of `G_a` along the stored path, up to each checkpoint
/// and never past `stop`.
pub fn accumulate_ga(m: &ModelSpec, p: &PathRecord, a: f64, checkpoints: &[f64], stop: Option<f64>) -> Result<Vec<f64>> {
    let ga = GaEvaluator::new(m, a)?;
    let stop = stop.unwrap_or(f64::INFINITY);
    let mut out = Vec::with_capacity(checkpoints.len());
    for &c in checkpoints {
        let end = c.min(stop);
        let mut sum = 0.0;
        for w in 0..p.times.len().saturating_sub(1) {
            let (t0, t1) = (p.times[w], p.times[w + 1]);
            if t0 >= end {
                break;
            }
            let x = p.states[w];
            if x <= 0.0 {
                return Err(domain("accumulate_ga", format!("state {x} <= 0 at t = {t0}")));
            }
            sum += ga.value(x)? * (t1.min(end) - t0);
        }
        out.push(sum);
    }
    Ok(out)
}

pub const PATH_CSV_HEADER: &str = "t,x";
pub const EVENT_CSV_HEADER: &str = "t,kind,magnitude";

pub fn write_path_csv<W: Write>(mut out: W, p: &PathRecord) -> io::Result<()> {
    writeln!(out, "{PATH_CSV_HEADER}")?;
    for (t, x) in p.times.iter().zip(&p.states) {
        writeln!(out, "{t},{x:e}")?;
    }
    Ok(())
}

pub fn write_event_csv<W: Write>(mut out: W, p: &PathRecord) -> io::Result<()> {
    writeln!(out, "{EVENT_CSV_HEADER}")?;
    for e in &p.events {
        writeln!(out, "{},{},{:e}", e.time, e.kind.label(), e.kind.magnitude())?;
    }
    Ok(())
}
