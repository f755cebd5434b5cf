//! Ensemble estimators: event probabilities, survival decay, stationarity,
//! ergodic averages and the exponential martingale check.
//!
//! Paths run on a local rayon pool of `threads` workers (0 = rayon's default).
//! Per-path results are collected in path-index order and reduced
//! sequentially, so every estimate is bit-identical for any thread count.

mod stats;

pub use stats::{ks_statistic, mean_stderr, wilson, McEstimate, Z95};

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::GaEvaluator;
use crate::error::{domain, Error, Result};
use crate::model::{hex_digest, ModelSpec};
use crate::simulate::{simulate_with, Event, Observer, Outcome, SimConfig, Tick};

/// Digest of the model and simulation settings.
pub fn config_hash(m: &ModelSpec, cfg: &SimConfig) -> String {
    let sim = toml::to_string(cfg).expect("sim config serializes");
    hex_digest(format!("{}\n[sim]\n{}", m.to_toml(), sim).as_bytes())
}

/// Run `f` for path indices `0..n` and return the results in index order.
pub fn run_paths<T, F>(n: u64, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| domain("run_paths", format!("cannot start thread pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| (0..n).into_par_iter().map(&f).collect());
    results.into_iter().collect()
}

fn require_n(op: &'static str, n: u64, min: u64) -> Result<()> {
    if n < min {
        return Err(domain(op, format!("needs at least {min} paths, got {n}")));
    }
    Ok(())
}

/// Index of the grid step at (or just after) time `t`.
fn grid_step(cfg: &SimConfig, t: f64) -> u64 {
    (t / cfg.dt - 1e-9).ceil().max(0.0) as u64
}

fn horizon(cfg: &SimConfig, t: f64) -> SimConfig {
    SimConfig { t_max: t, ..*cfg }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathEvent {
    AbsorbedBy { t: f64 },
    ExplodedBy { t: f64 },
    SurvivesAt { t: f64 },
}

impl PathEvent {
    pub fn time(&self) -> f64 {
        match *self {
            PathEvent::AbsorbedBy { t } | PathEvent::ExplodedBy { t } | PathEvent::SurvivesAt { t } => t,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            PathEvent::AbsorbedBy { t } => format!("absorbed-by({t})"),
            PathEvent::ExplodedBy { t } => format!("exploded-by({t})"),
            PathEvent::SurvivesAt { t } => format!("survives-at({t})"),
        }
    }

    fn realized(&self, o: &Outcome) -> bool {
        match *self {
            PathEvent::AbsorbedBy { t } => o.absorbed_by(t),
            PathEvent::ExplodedBy { t } => o.exploded_by(t),
            PathEvent::SurvivesAt { t } => !o.absorbed_by(t) && !o.exploded_by(t),
        }
    }
}

struct Silent;

impl Observer for Silent {
    fn tick(&mut self, _: &Tick) -> bool {
        true
    }
}

fn outcomes(m: &ModelSpec, cfg: &SimConfig, x0: f64, t: f64, n: u64, threads: usize) -> Result<Vec<Outcome>> {
    if !(t <= cfg.t_max) {
        return Err(domain("estimate_event_prob", format!("t = {t} exceeds t_max = {}", cfg.t_max)));
    }
    let run = horizon(cfg, t);
    run.validate()?;
    run_paths(n, threads, |i| simulate_with(m, &run, x0, i, &mut Silent))
}

/// Fraction of `n` paths realizing `event`.
pub fn estimate_event_prob(
    m: &ModelSpec,
    cfg: &SimConfig,
    x0: f64,
    event: PathEvent,
    n: u64,
    threads: usize,
) -> Result<McEstimate> {
    require_n("estimate_event_prob", n, 100)?;
    let out = outcomes(m, cfg, x0, event.time(), n, threads)?;
    let k = out.iter().filter(|o| event.realized(o)).count() as u64;
    Ok(McEstimate::proportion(event.label(), k, n, cfg.seed, &config_hash(m, cfg)))
}

/// Absorbed, exploded and surviving fractions at `t` from one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFractions {
    pub absorbed: McEstimate,
    pub exploded: McEstimate,
    pub survives: McEstimate,
    /// Path counts in the same order; they add up to `n`.
    pub counts: [u64; 3],
}

pub fn event_fractions(m: &ModelSpec, cfg: &SimConfig, x0: f64, t: f64, n: u64, threads: usize) -> Result<EventFractions> {
    require_n("event_fractions", n, 1)?;
    let out = outcomes(m, cfg, x0, t, n, threads)?;
    let hash = config_hash(m, cfg);
    let events = [PathEvent::AbsorbedBy { t }, PathEvent::ExplodedBy { t }, PathEvent::SurvivesAt { t }];
    let counts = events.map(|e| out.iter().filter(|o| e.realized(o)).count() as u64);
    let [absorbed, exploded, survives] =
        [0, 1, 2].map(|i| McEstimate::proportion(events[i].label(), counts[i], n, cfg.seed, &hash));
    Ok(EventFractions {
        absorbed,
        exploded,
        survives,
        counts,
    })
}

/// Absorption probability by `t` at `x_abs` and at `x_abs / 10`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCheck {
    pub at_threshold: McEstimate,
    pub at_tenth: McEstimate,
    /// `|difference| <= 2 (stderr_a + stderr_b)`.
    pub passes: bool,
}

pub fn threshold_sensitivity(m: &ModelSpec, cfg: &SimConfig, x0: f64, t: f64, n: u64, threads: usize) -> Result<ThresholdCheck> {
    let event = PathEvent::AbsorbedBy { t };
    let a = estimate_event_prob(m, cfg, x0, event, n, threads)?;
    let tenth = SimConfig {
        x_abs: cfg.x_abs / 10.0,
        ..*cfg
    };
    let b = estimate_event_prob(m, &tenth, x0, event, n, threads)?;
    let passes = (a.mean - b.mean).abs() <= 2.0 * (a.stderr + b.stderr);
    Ok(ThresholdCheck {
        at_threshold: a,
        at_tenth: b,
        passes,
    })
}

/// Fraction of paths whose running minimum falls strictly below `level` by `t`.
pub fn running_minimum_fraction(
    m: &ModelSpec,
    cfg: &SimConfig,
    x0: f64,
    level: f64,
    t: f64,
    n: u64,
    threads: usize,
) -> Result<McEstimate> {
    require_n("running_minimum_fraction", n, 1)?;
    let run = horizon(cfg, t);
    let hits = run_paths(n, threads, |i| {
        let mut hit = false;
        let mut obs = |tick: &Tick| {
            hit = tick.state < level;
            !hit
        };
        simulate_with(m, &run, x0, i, &mut FnObserver(&mut obs))?;
        Ok(hit)
    })?;
    let k = hits.iter().filter(|&&h| h).count() as u64;
    Ok(McEstimate::proportion(
        format!("running-min-below({level})-by({t})"),
        k,
        n,
        cfg.seed,
        &config_hash(m, cfg),
    ))
}

/// Adapts a closure over ticks into an [`Observer`].
pub struct FnObserver<'f, F: FnMut(&Tick) -> bool>(pub &'f mut F);

impl<F: FnMut(&Tick) -> bool> Observer for FnObserver<'_, F> {
    fn tick(&mut self, tick: &Tick) -> bool {
        (self.0)(tick)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalPoint {
    pub t: f64,
    pub n_alive: u64,
    pub p_hat: f64,
    pub stderr: f64,
}

/// Empirical `P(X_t > 0)` at each time. Exploded paths count as alive.
pub fn survival_curve(
    m: &ModelSpec,
    cfg: &SimConfig,
    x0: f64,
    times: &[f64],
    n: u64,
    threads: usize,
) -> Result<Vec<SurvivalPoint>> {
    require_n("survival_curve", n, 1)?;
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return Err(domain("survival_curve", "times must be non-negative and strictly increasing"));
    }
    let t_end = *times.last().expect("non-empty");
    let run = horizon(cfg, t_end);
    let death = run_paths(n, threads, |i| {
        Ok(match simulate_with(m, &run, x0, i, &mut Silent)? {
            Outcome::Absorbed { time } => time,
            _ => f64::INFINITY,
        })
    })?;
    let nf = n as f64;
    Ok(times
        .iter()
        .map(|&t| {
            let alive = death.iter().filter(|&&d| d > t).count() as u64;
            let p = alive as f64 / nf;
            SurvivalPoint {
                t,
                n_alive: alive,
                p_hat: p,
                stderr: (p * (1.0 - p) / nf).sqrt(),
            }
        })
        .collect())
}

pub const SURVIVAL_CSV_HEADER: &str = "t,n_alive,p_hat,stderr";

pub fn write_survival_csv<W: Write>(mut out: W, curve: &[SurvivalPoint]) -> io::Result<()> {
    writeln!(out, "{SURVIVAL_CSV_HEADER}")?;
    for p in curve {
        writeln!(out, "{},{},{:e},{:e}", p.t, p.n_alive, p.p_hat, p.stderr)?;
    }
    Ok(())
}

/// Least-squares fit of `ln P̂(X_t > 0) - poly_power ln t = intercept + slope t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub times: Vec<f64>,
    pub log_survival: Vec<f64>,
    pub poly_power: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Delta-method interval, treating the time points as independent.
    pub slope_ci: (f64, f64),
    pub n: u64,
    pub curve: Vec<SurvivalPoint>,
}

impl DecayFit {
    /// One-sided comparison with an upper-envelope exponent.
    pub fn within_bound(&self, exponent: f64, tol: f64) -> bool {
        self.slope <= exponent + tol
    }
}

/// Minimum expected survivors for a time point to enter the fit.
pub const MIN_SURVIVORS: f64 = 30.0;

pub fn survival_decay_fit(
    m: &ModelSpec,
    cfg: &SimConfig,
    x0: f64,
    times: &[f64],
    poly_power: f64,
    n: u64,
    threads: usize,
) -> Result<DecayFit> {
    if times.len() < 4 {
        return Err(domain("survival_decay_fit", "needs at least 4 time points"));
    }
    if poly_power != 0.0 && times[0] <= 0.0 {
        return Err(domain("survival_decay_fit", "ln t needs t > 0"));
    }
    let curve = survival_curve(m, cfg, x0, times, n, threads)?;
    fit_curve(curve, poly_power, n)
}

fn fit_curve(curve: Vec<SurvivalPoint>, poly_power: f64, n: u64) -> Result<DecayFit> {
    let nf = n as f64;
    let usable: Vec<&SurvivalPoint> = curve.iter().filter(|p| p.p_hat >= MIN_SURVIVORS / nf).collect();
    if usable.len() < 4 {
        return Err(Error::TooFewSurvivors { usable: usable.len() });
    }
    let ts: Vec<f64> = usable.iter().map(|p| p.t).collect();
    let logs: Vec<f64> = usable.iter().map(|p| p.p_hat.ln()).collect();
    let ys: Vec<f64> = ts
        .iter()
        .zip(&logs)
        .map(|(&t, &l)| if poly_power == 0.0 { l } else { l - poly_power * t.ln() })
        .collect();
    let k = ts.len() as f64;
    let t_bar = ts.iter().sum::<f64>() / k;
    let y_bar = ys.iter().sum::<f64>() / k;
    let sxx: f64 = ts.iter().map(|t| (t - t_bar) * (t - t_bar)).sum();
    let weights: Vec<f64> = ts.iter().map(|t| (t - t_bar) / sxx).collect();
    let slope: f64 = weights.iter().zip(&ys).map(|(w, y)| w * y).sum();
    let intercept = y_bar - slope * t_bar;
    // Var ln p̂ ≈ (1 - p) / (n p)
    let var: f64 = weights
        .iter()
        .zip(&usable)
        .map(|(w, p)| w * w * (1.0 - p.p_hat) / (nf * p.p_hat))
        .sum();
    let half = Z95 * var.sqrt();
    Ok(DecayFit {
        times: ts,
        log_survival: logs,
        poly_power,
        slope,
        intercept,
        slope_ci: (slope - half, slope + half),
        n,
        curve,
    })
}

/// Snapshot values of every path at the given times. Absorbed paths read 0,
/// exploded paths read infinity.
pub fn snapshots(
    m: &ModelSpec,
    cfg: &SimConfig,
    x0: f64,
    times: &[f64],
    n: u64,
    threads: usize,
) -> Result<Vec<Vec<f64>>> {
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return Err(domain("snapshots", "times must be non-negative and strictly increasing"));
    }
    let run = horizon(cfg, *times.last().expect("non-empty"));
    run.validate()?;
    let steps: Vec<u64> = times.iter().map(|&t| grid_step(&run, t)).collect();
    run_paths(n, threads, |i| {
        let mut vals = Vec::with_capacity(steps.len());
        let mut obs = |tick: &Tick| {
            while vals.len() < steps.len() && tick.on_grid && tick.step == steps[vals.len()] {
                vals.push(tick.state);
            }
            vals.len() < steps.len()
        };
        let outcome = simulate_with(m, &run, x0, i, &mut FnObserver(&mut obs))?;
        let fill = match outcome {
            Outcome::Exploded { .. } => f64::INFINITY,
            _ => 0.0,
        };
        vals.resize(steps.len(), fill);
        Ok(vals)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryReport {
    pub t_burn: f64,
    pub t_end: f64,
    pub n: u64,
    pub n_surviving: u64,
    /// Mean over surviving paths at `t_burn`.
    pub burn_mean: McEstimate,
    pub mean: McEstimate,
    pub second_moment: McEstimate,
    /// `𝔼[X²] / 𝔼[X]` with a delta-method standard error.
    pub moment_ratio: McEstimate,
    /// Mean of `g(X) - X r(X) (1 - 𝔼[Θ])`, zero under stationarity.
    pub residual: McEstimate,
    /// KS distance between the `t_end` and `1.5 t_end` snapshots.
    pub ks_statistic: f64,
    /// Surviving values at `t_end`, in path order.
    pub snapshot: Vec<f64>,
    pub later_snapshot: Vec<f64>,
}

impl StationaryReport {
    /// Ensemble mean of `f` over the `t_end` snapshot.
    pub fn ensemble_mean(&self, f: &TestFunction) -> McEstimate {
        let vals: Vec<f64> = self.snapshot.iter().map(|&x| f.eval(x)).collect();
        McEstimate::from_samples(
            format!("ensemble-mean-{}", f.label()),
            &vals,
            self.mean.seed,
            &self.mean.config_hash,
        )
    }
}

pub fn stationary_estimate(
    m: &ModelSpec,
    cfg: &SimConfig,
    x0: f64,
    t_burn: f64,
    t_end: f64,
    n: u64,
    threads: usize,
) -> Result<StationaryReport> {
    require_n("stationary_estimate", n, 2)?;
    if !(0.0 <= t_burn && t_burn < t_end) {
        return Err(domain("stationary_estimate", format!("needs 0 <= t_burn < t_end, got {t_burn}, {t_end}")));
    }
    let later = 1.5 * t_end;
    let snaps = snapshots(m, cfg, x0, &[t_burn, t_end, later], n, threads)?;
    let live = |j: usize| -> Vec<f64> {
        snaps
            .iter()
            .map(|s| s[j])
            .filter(|&x| x > 0.0 && x.is_finite())
            .collect()
    };
    let (burn, at_end, after) = (live(0), live(1), live(2));
    if at_end.is_empty() {
        return Err(Error::AllAbsorbed { n, time: t_end });
    }
    let hash = config_hash(m, cfg);
    let seed = cfg.seed;
    let one_minus_mean_theta = m.kappa().one_minus_moment(1.0)?;
    let squares: Vec<f64> = at_end.iter().map(|x| x * x).collect();
    let residuals: Vec<f64> = at_end
        .iter()
        .map(|&x| m.g().eval(x) - x * m.r().eval(x) * one_minus_mean_theta)
        .collect();
    let mean = McEstimate::from_samples("mean", &at_end, seed, &hash);
    let second = McEstimate::from_samples("second-moment", &squares, seed, &hash);
    let moment_ratio = ratio_estimate(&at_end, &squares, seed, &hash);
    Ok(StationaryReport {
        t_burn,
        t_end,
        n,
        n_surviving: at_end.len() as u64,
        burn_mean: McEstimate::from_samples("burn-mean", &burn, seed, &hash),
        mean,
        second_moment: second,
        moment_ratio,
        residual: McEstimate::from_samples("stationarity-residual", &residuals, seed, &hash),
        ks_statistic: ks_statistic(&at_end, &after),
        snapshot: at_end,
        later_snapshot: after,
    })
}

/// `mean(y) / mean(x)` with the delta-method standard error.
fn ratio_estimate(x: &[f64], y: &[f64], seed: u64, hash: &str) -> McEstimate {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let r = my / mx;
    let stderr = if x.len() > 1 {
        let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - r * a).powi(2)).sum();
        (ss / (n - 1.0) / n).sqrt() / mx
    } else {
        0.0
    };
    McEstimate {
        quantity: "second-moment/mean".into(),
        n: x.len() as u64,
        mean: r,
        stderr,
        ci95: (r - Z95 * stderr, r + Z95 * stderr),
        seed,
        config_hash: hash.to_string(),
    }
}

/// Bounded test functions for ergodic averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunction {
    /// 1 on the open interval `(lo, hi)`.
    Indicator { lo: f64, hi: f64 },
    /// `min(max(x, lo), hi)`.
    Clip { lo: f64, hi: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Indicator { lo, hi } => f64::from(lo < x && x < hi),
            TestFunction::Clip { lo, hi } => x.clamp(lo, hi),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            TestFunction::Indicator { lo, hi } => format!("indicator({lo},{hi})"),
            TestFunction::Clip { lo, hi } => format!("clip({lo},{hi})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicAverage {
    pub value: f64,
    /// Length of the averaging window actually simulated.
    pub time_covered: f64,
    /// The path was absorbed or exploded before `t_end`.
    pub partial: bool,
    pub outcome: Outcome,
}

/// `(1 / t_end) ∫₀^{t_end} f(X_s) ds` along one path, by left sums on the
/// full-resolution stream.
pub fn ergodic_average(
    m: &ModelSpec,
    cfg: &SimConfig,
    x0: f64,
    f: &TestFunction,
    t_end: f64,
    path_index: u64,
) -> Result<ErgodicAverage> {
    let run = horizon(cfg, t_end);
    let mut sum = 0.0;
    let mut prev = x0;
    let mut covered = 0.0;
    let mut obs = |tick: &Tick| {
        if tick.h > 0.0 {
            sum += f.eval(prev) * tick.h;
            covered = tick.time;
        }
        prev = tick.state;
        true
    };
    let outcome = simulate_with(m, &run, x0, path_index, &mut FnObserver(&mut obs))?;
    let partial = !matches!(outcome, Outcome::RanToHorizon);
    let value = if covered > 0.0 { sum / covered } else { f.eval(x0) };
    Ok(ErgodicAverage {
        value,
        time_covered: covered,
        partial,
        outcome,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingalePoint {
    pub t: f64,
    pub estimate: McEstimate,
    pub deviation: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub a: f64,
    pub c: f64,
    pub b: f64,
    /// `x0^{1-a}`
    pub target: f64,
    pub budget: f64,
    pub points: Vec<MartingalePoint>,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.points.iter().all(|p| !p.flagged)
    }
}

struct MartingaleObserver<'m> {
    ga: GaEvaluator<'m>,
    a: f64,
    c: f64,
    b: f64,
    steps: Vec<u64>,
    values: Vec<f64>,
    integral: f64,
    prev: f64,
    error: Option<Error>,
}

impl MartingaleObserver<'_> {
    fn z(&self, x: f64) -> f64 {
        x.powf(1.0 - self.a) * self.integral.exp()
    }
}

impl Observer for MartingaleObserver<'_> {
    fn tick(&mut self, tick: &Tick) -> bool {
        if tick.h > 0.0 {
            match self.ga.value(self.prev) {
                Ok(v) => self.integral += v * tick.h,
                Err(e) => {
                    self.error = Some(e);
                    return false;
                }
            }
        }
        let x = tick.state;
        self.prev = x;
        if x < self.c || x > self.b {
            // Stopped at T: every remaining checkpoint reads Z_T.
            let z = self.z(x);
            self.values.resize(self.steps.len(), z);
            return false;
        }
        while self.values.len() < self.steps.len() && tick.on_grid && tick.step == self.steps[self.values.len()] {
            let z = self.z(x);
            self.values.push(z);
        }
        self.values.len() < self.steps.len()
    }

    fn event(&mut self, _: &Event) {}
}

/// Ensemble mean of `X_{t∧T}^{1-a} exp(∫₀^{t∧T} G_a(X_s) ds)` with
/// `T = τ⁻(c) ∧ τ⁺(b)`, compared with `x0^{1-a}` at each checkpoint.
#[allow(clippy::too_many_arguments)]
pub fn martingale_check(
    m: &ModelSpec,
    cfg: &SimConfig,
    x0: f64,
    a: f64,
    c: f64,
    b: f64,
    checkpoints: &[f64],
    budget: f64,
    n: u64,
    threads: usize,
) -> Result<MartingaleReport> {
    require_n("martingale_check", n, 2)?;
    GaEvaluator::new(m, a)?;
    if !(0.0 < c && c < x0 && x0 < b) {
        return Err(domain("martingale_check", format!("needs 0 < c < x0 < b, got c={c}, x0={x0}, b={b}")));
    }
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[1] <= w[0]) || checkpoints[0] < 0.0 {
        return Err(domain("martingale_check", "checkpoints must be non-negative and strictly increasing"));
    }
    let target = x0.powf(1.0 - a);
    let t_end = *checkpoints.last().expect("non-empty");
    let samples: Vec<Vec<f64>> = if t_end == 0.0 {
        vec![vec![target]; n as usize]
    } else {
        let run = horizon(cfg, t_end);
        run.validate()?;
        let steps: Vec<u64> = checkpoints.iter().map(|&t| grid_step(&run, t)).collect();
        run_paths(n, threads, |i| {
            let mut obs = MartingaleObserver {
                ga: GaEvaluator::new(m, a)?,
                a,
                c,
                b,
                steps: steps.clone(),
                values: Vec::with_capacity(steps.len()),
                integral: 0.0,
                prev: x0,
                error: None,
            };
            let outcome = simulate_with(m, &run, x0, i, &mut obs)?;
            if let Some(e) = obs.error {
                return Err(e);
            }
            if obs.values.len() < steps.len() {
                return Err(domain(
                    "martingale_check",
                    format!("path {i} ended ({outcome:?}) before leaving [{c}, {b}]"),
                ));
            }
            Ok(obs.values)
        })?
    };
    let hash = config_hash(m, cfg);
    let points = checkpoints
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            let estimate = McEstimate::from_samples(format!("Z(a={a})@t={t}"), &col, cfg.seed, &hash);
            let deviation = estimate.mean - target;
            let flagged = !(deviation.abs() <= 3.0 * estimate.stderr + budget);
            MartingalePoint {
                t,
                estimate,
                deviation,
                flagged,
            }
        })
        .collect();
    Ok(MartingaleReport {
        a,
        c,
        b,
        target,
        budget,
        points,
    })
}

pub const ESTIMATE_CSV_HEADER: &str = "quantity,n,mean,stderr,ci_lo,ci_hi,seed,config_hash";

pub fn write_estimate_csv<W: Write>(mut out: W, estimates: &[McEstimate]) -> io::Result<()> {
    writeln!(out, "{ESTIMATE_CSV_HEADER}")?;
    for e in estimates {
        writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e},{},{}",
            e.quantity, e.n, e.mean, e.stderr, e.ci95.0, e.ci95.1, e.seed, e.config_hash
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, CoefficientFn, FragmentationKernel, ModelConfig};

    fn with(f: impl FnOnce(&mut ModelConfig)) -> ModelSpec {
        let mut c = ModelConfig::zero();
        f(&mut c);
        build_model(c).unwrap()
    }

    fn m1() -> ModelSpec {
        with(|c| {
            c.g = CoefficientFn::Linear { c: 0.1 };
            c.sigma2 = CoefficientFn::Linear { c: 1.0 };
            c.r = CoefficientFn::Affine { c0: 1.0, c1: 0.0 };
            c.kappa = FragmentationKernel::Atom { theta: 0.5 };
        })
    }

    #[test]
    fn zero_model_survives_surely() {
        let cfg = SimConfig::with_horizon(1.0);
        let e = estimate_event_prob(&ModelSpec::zero(), &cfg, 1.0, PathEvent::SurvivesAt { t: 1.0 }, 100, 1).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn fractions_partition_the_ensemble() {
        let cfg = SimConfig::with_horizon(3.0);
        let f = event_fractions(&m1(), &cfg, 0.5, 3.0, 300, 2).unwrap();
        assert_eq!(f.counts.iter().sum::<u64>(), 300);
        assert!(f.absorbed.mean > 0.0);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = SimConfig::with_horizon(2.0);
        let a = estimate_event_prob(&m1(), &cfg, 0.5, PathEvent::AbsorbedBy { t: 2.0 }, 200, 1).unwrap();
        let b = estimate_event_prob(&m1(), &cfg, 0.5, PathEvent::AbsorbedBy { t: 2.0 }, 200, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn absorption_is_monotone_in_time() {
        let cfg = SimConfig::with_horizon(4.0);
        let mut last = 0.0;
        for t in [0.5, 1.0, 2.0, 4.0] {
            let e = estimate_event_prob(&m1(), &cfg, 0.5, PathEvent::AbsorbedBy { t }, 200, 1).unwrap();
            assert!(e.mean >= last);
            last = e.mean;
        }
    }

    #[test]
    fn immortal_model_has_flat_survival() {
        let cfg = SimConfig::with_horizon(1.0);
        let fit = survival_decay_fit(&ModelSpec::zero(), &cfg, 1.0, &[0.2, 0.4, 0.6, 0.8], 0.0, 100, 1).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!(fit.log_survival.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn decay_fit_needs_survivors() {
        let cfg = SimConfig::with_horizon(20.0);
        let err = survival_decay_fit(&m1(), &cfg, 1.0, &[5.0, 10.0, 15.0, 20.0], 0.0, 100, 1).unwrap_err();
        assert!(matches!(err, Error::TooFewSurvivors { .. }));
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let curve: Vec<SurvivalPoint> = [1.0, 2.0, 3.0, 4.0, 5.0]
            .iter()
            .map(|&t| SurvivalPoint {
                t,
                n_alive: 0,
                p_hat: (-0.3 * t).exp() * t.powf(-0.5),
                stderr: 0.0,
            })
            .collect();
        let fit = fit_curve(curve, -0.5, 1_000_000).unwrap();
        assert!((fit.slope + 0.3).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!(fit.within_bound(-0.3, 1e-9));
    }

    #[test]
    fn stationary_zero_model_is_degenerate() {
        let cfg = SimConfig::with_horizon(1.0);
        let s = stationary_estimate(&ModelSpec::zero(), &cfg, 1.0, 0.5, 1.0, 50, 1).unwrap();
        assert_eq!(s.mean.mean, 1.0);
        assert_eq!(s.residual.mean, 0.0);
        assert_eq!(s.ks_statistic, 0.0);
        assert_eq!(s.moment_ratio.mean, 1.0);
    }

    #[test]
    fn stationary_reports_all_absorbed() {
        let m = with(|c| c.g = CoefficientFn::Linear { c: -50.0 });
        let cfg = SimConfig::with_horizon(2.0);
        let err = stationary_estimate(&m, &cfg, 1.0, 0.5, 1.0, 10, 1).unwrap_err();
        assert!(matches!(err, Error::AllAbsorbed { .. }));
    }

    #[test]
    fn ergodic_average_of_constant_path() {
        let cfg = SimConfig::with_horizon(1.0);
        let f = TestFunction::Indicator { lo: 0.5, hi: 2.0 };
        let e = ergodic_average(&ModelSpec::zero(), &cfg, 1.0, &f, 1.0, 0).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        assert!(!e.partial);
    }

    #[test]
    fn ergodic_average_flags_absorbed_path() {
        let m = with(|c| c.g = CoefficientFn::Linear { c: -50.0 });
        let cfg = SimConfig::with_horizon(2.0);
        let f = TestFunction::Clip { lo: 0.0, hi: 10.0 };
        let e = ergodic_average(&m, &cfg, 1.0, &f, 2.0, 0).unwrap();
        assert!(e.partial);
        assert!(e.time_covered < 2.0);
    }

    #[test]
    fn martingale_edge_cases() {
        let m = with(|c| {
            c.g = CoefficientFn::Linear { c: 2.0 };
            c.sigma2 = CoefficientFn::Power { c: 1.0, beta: 2.0 };
            c.r = CoefficientFn::Affine { c0: 1.0, c1: 0.0 };
            c.kappa = FragmentationKernel::Atom { theta: 0.5 };
        });
        let cfg = SimConfig::with_horizon(1.0);
        let r = martingale_check(&m, &cfg, 2.0, 2.0, 0.1, 10.0, &[0.0], 0.0, 10, 1).unwrap();
        assert_eq!(r.points[0].estimate.mean, 0.5);
        assert!(r.passed());
        assert!(martingale_check(&m, &cfg, 1.0, 1.0, 0.1, 10.0, &[1.0], 0.0, 10, 1).is_err());
        assert!(martingale_check(&m, &cfg, 1.0, 2.0, 2.0, 10.0, &[1.0], 0.0, 10, 1).is_err());
    }

    #[test]
    fn running_minimum_stops_early() {
        let cfg = SimConfig::with_horizon(1.0);
        let e = running_minimum_fraction(&m1(), &cfg, 1.0, 2.0, 1.0, 20, 1).unwrap();
        assert_eq!(e.mean, 1.0);
    }

    #[test]
    fn estimate_csv_columns() {
        let e = McEstimate::proportion("p", 1, 2, 7, "abc");
        let mut buf = Vec::new();
        write_estimate_csv(&mut buf, &[e]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let row = s.lines().nth(1).unwrap();
        assert_eq!(row.split(',').count(), 8);
        assert!(row.ends_with(",7,abc"));
    }
}
