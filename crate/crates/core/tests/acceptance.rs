//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria 1-9 run single-threaded at the default step; criterion 10 reruns
//! each of them with 8 worker threads (outputs must match byte for byte) and
//! with the step halved (each estimate must move by less than its 95% CI width).

use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use csbp_core::criteria::{eval_i, eval_i_a};
use csbp_core::model::{build_model, CoefficientFn, FragmentationKernel, JumpMeasure, ModelConfig, ModelSpec};
use csbp_core::montecarlo::{
    ergodic_average, estimate_event_prob, event_fractions, martingale_check, running_minimum_fraction,
    stationary_estimate, survival_decay_fit, threshold_sensitivity, write_estimate_csv, DecayFit, McEstimate,
    PathEvent, TestFunction, Z95,
};
use csbp_core::regimes::{check_condition, decay_rate_bounds, ConditionId, ConditionParams};
use csbp_core::simulate::SimConfig;

const DT: f64 = 1e-3;

fn model(g: CoefficientFn, sigma2: CoefficientFn, r: CoefficientFn, theta: f64) -> ModelSpec {
    build_model(ModelConfig {
        g,
        sigma2,
        p: CoefficientFn::Zero,
        r,
        pi: JumpMeasure::Zero,
        kappa: FragmentationKernel::Atom { theta },
    })
    .expect("acceptance model is valid")
}

fn lin(c: f64) -> CoefficientFn {
    CoefficientFn::Linear { c }
}

fn rate(c0: f64, c1: f64) -> CoefficientFn {
    CoefficientFn::Affine { c0, c1 }
}

fn square(c: f64) -> CoefficientFn {
    CoefficientFn::Power { c, beta: 2.0 }
}

fn feller() -> ModelSpec {
    model(CoefficientFn::Zero, lin(1.0), CoefficientFn::Zero, 1.0)
}

fn m1() -> ModelSpec {
    model(lin(0.1), lin(1.0), rate(1.0, 0.0), 0.5)
}

fn m_g() -> ModelSpec {
    model(lin(2.0), square(1.0), rate(1.0, 0.0), 0.5)
}

fn m2() -> ModelSpec {
    model(lin(5.0), square(0.5), rate(1.0, 0.0), 0.5)
}

fn m3() -> ModelSpec {
    model(lin(2.0), square(1.0), rate(1.0, 1.0), 0.5)
}

fn eta_zero_model() -> ModelSpec {
    model(lin(LN_2), lin(1.0), rate(1.0, 0.0), 0.5)
}

fn cfg(t_max: f64, dt: f64) -> SimConfig {
    SimConfig {
        dt,
        t_max,
        seed: 20240611,
        ..SimConfig::default()
    }
}

/// What a criterion produced, for printing and for the criterion-10 reruns.
struct Outcome {
    pass: bool,
    detail: String,
    /// Estimates compared under step halving.
    estimates: Vec<McEstimate>,
    /// Every number the criterion produced, rendered for byte comparison.
    bytes: Vec<u8>,
}

impl Outcome {
    fn new(pass: bool, detail: String, estimates: Vec<McEstimate>, extra: &str) -> Self {
        let mut bytes = Vec::new();
        write_estimate_csv(&mut bytes, &estimates).expect("write to memory");
        bytes.extend_from_slice(extra.as_bytes());
        Self {
            pass,
            detail,
            estimates,
            bytes,
        }
    }
}

fn slope_estimate(name: &str, fit: &DecayFit) -> McEstimate {
    let se = (fit.slope_ci.1 - fit.slope_ci.0) / (2.0 * Z95);
    McEstimate {
        quantity: name.to_string(),
        n: fit.n,
        mean: fit.slope,
        stderr: se,
        ci95: fit.slope_ci,
        seed: 0,
        config_hash: String::new(),
    }
}

fn fit_bytes(fit: &DecayFit) -> String {
    let mut s = format!("slope={:e},intercept={:e}\n", fit.slope, fit.intercept);
    for p in &fit.curve {
        writeln!(s, "{},{},{:e}", p.t, p.n_alive, p.p_hat).unwrap();
    }
    s
}

fn criterion_1(threads: usize, dt: f64) -> Outcome {
    let e = estimate_event_prob(&feller(), &cfg(10.0, dt), 1.0, PathEvent::AbsorbedBy { t: 10.0 }, 20_000, threads)
        .expect("feller estimate");
    let pass = (0.885..=0.925).contains(&e.mean);
    let detail = format!(
        "Feller absorbed-by(10) = {:.4} (closed form e^-0.1 = {:.4}), required in [0.885, 0.925]",
        e.mean,
        (-0.1f64).exp()
    );
    Outcome::new(pass, detail, vec![e], "")
}

fn criterion_2(threads: usize, dt: f64) -> Outcome {
    let r = martingale_check(&m_g(), &cfg(2.0, dt), 1.0, 2.0, 0.1, 10.0, &[0.5, 1.0, 2.0], 0.02, 50_000, threads)
        .expect("martingale check");
    let mut detail = String::from("M_G a=2 martingale means:");
    for p in &r.points {
        write!(
            detail,
            " t={} {:.4}±{:.4} (|dev| {:.4} vs {:.4});",
            p.t,
            p.estimate.mean,
            p.estimate.stderr,
            p.deviation.abs(),
            3.0 * p.estimate.stderr + r.budget
        )
        .unwrap();
    }
    Outcome::new(r.passed(), detail, r.points.into_iter().map(|p| p.estimate).collect(), "")
}

fn criterion_3(_threads: usize, _dt: f64) -> Outcome {
    let measures = [
        ("atoms[(1,1)]", JumpMeasure::Atoms { points: vec![(1.0, 1.0)] }),
        ("exponential(1,1)", JumpMeasure::Exponential { mass: 1.0, lambda: 1.0 }),
    ];
    let mut pass = true;
    let mut detail = String::from("|I_a - I| at a=1.001:");
    let mut extra = String::new();
    for (name, pi) in measures {
        let mut c = ModelConfig::zero();
        c.pi = pi;
        let m = build_model(c).expect("jump model");
        for x in [0.1, 1.0, 10.0] {
            let i = eval_i(&m, x).expect("I");
            let errs: Vec<f64> = [0.1, 0.01, 0.001]
                .iter()
                .map(|eps| (eval_i_a(&m, x, 1.0 + eps).expect("I_a") - i).abs())
                .collect();
            let monotone = errs[0] > errs[1] && errs[1] > errs[2];
            pass &= errs[2] <= 1e-3 && monotone;
            write!(detail, " {name} x={x}: {:.2e}{};", errs[2], if monotone { "" } else { " (not monotone)" }).unwrap();
            writeln!(extra, "{name},{x},{:e},{:e},{:e}", errs[0], errs[1], errs[2]).unwrap();
        }
    }
    Outcome::new(pass, detail, vec![], &extra)
}

fn criterion_4(threads: usize, dt: f64) -> Outcome {
    let m = m1();
    let c = cfg(30.0, dt);
    let f = event_fractions(&m, &c, 1.0, 30.0, 10_000, threads).expect("fractions");
    let s = threshold_sensitivity(&m, &c, 1.0, 30.0, 10_000, threads).expect("threshold check");
    let pass = f.survives.mean <= 0.01 && s.passes;
    let detail = format!(
        "M1 surviving at T=30 = {:.4} (<= 0.01); absorbed-by(30) at x_abs {:.5} vs x_abs/10 {:.5}, sensitivity {}",
        f.survives.mean,
        s.at_threshold.mean,
        s.at_tenth.mean,
        if s.passes { "ok" } else { "failed" }
    );
    Outcome::new(pass, detail, vec![f.survives, s.at_threshold, s.at_tenth], "")
}

fn criterion_5(threads: usize, dt: f64) -> Outcome {
    let m = m1();
    let bound = decay_rate_bounds(&m, LN_2 - 0.1, 1.0).expect("rate bound");
    let times: Vec<f64> = (2..=12).map(f64::from).collect();
    let fit = survival_decay_fit(&m, &cfg(12.0, dt), 1.0, &times, bound.poly_power, 200_000, threads).expect("fit");
    let pass = fit.within_bound(bound.exponent, 0.1);
    let detail = format!(
        "M1 fitted slope {:.4} (CI [{:.4}, {:.4}]), bound exponent {:.4} [{}], required <= {:.4}",
        fit.slope,
        fit.slope_ci.0,
        fit.slope_ci.1,
        bound.exponent,
        bound.case.label(),
        bound.exponent + 0.1
    );
    Outcome::new(pass, detail, vec![slope_estimate("slope", &fit)], &fit_bytes(&fit))
}

fn criterion_6(threads: usize, dt: f64) -> Outcome {
    let m = eta_zero_model();
    let bound = decay_rate_bounds(&m, 0.0, 1.0).expect("rate bound");
    let times: Vec<f64> = (2..=16).map(|k| 5.0 * f64::from(k)).collect();
    let fit = survival_decay_fit(&m, &cfg(80.0, dt), 1.0, &times, bound.poly_power, 200_000, threads).expect("fit");
    let pass = fit.slope.abs() <= 0.05;
    let detail = format!(
        "eta=0 model, poly power {}: slope {:.4} (CI [{:.4}, {:.4}]) over t in [10, 80], required |slope| <= 0.05",
        bound.poly_power, fit.slope, fit.slope_ci.0, fit.slope_ci.1
    );
    Outcome::new(pass, detail, vec![slope_estimate("slope", &fit)], &fit_bytes(&fit))
}

fn criterion_7(threads: usize, dt: f64) -> Outcome {
    let m = m2();
    let c = SimConfig {
        x_max: 100.0,
        ..cfg(20.0, dt)
    };
    let e = estimate_event_prob(&m, &c, 1.0, PathEvent::ExplodedBy { t: 20.0 }, 10_000, threads).expect("estimate");
    let grid: Vec<f64> = (-6..=4).map(|k| 10f64.powi(k)).collect();
    let report = check_condition(&m, ConditionId::Gvfg, ConditionParams::default().with_eta(3.3), &grid).expect("GVFG");
    let margin = report.min_margin();
    let exact = 5.0 - LN_2 - 1.0 - 3.3;
    let pass = e.mean >= 0.99 && report.satisfied() && (margin - exact).abs() < 1e-9;
    let detail = format!(
        "M2 fraction above 100 by t=20 = {:.4} (>= 0.99); GVFG eta=3.3 {} with margin {:.5} (expected {:.5})",
        e.mean,
        report.verdict.label(),
        margin,
        exact
    );
    Outcome::new(pass, detail, vec![e], &format!("{margin:e}\n"))
}

/// Single-path time averages of clip(X) scatter by about 1.4% at this length.
const ERGODIC_T: f64 = 200_000.0;

fn criterion_8(threads: usize, dt: f64) -> Outcome {
    let m = m3();
    // 0 is inaccessible for M3 and its stationary law puts mass like x^-0.75 near 0, so a
    // 1e-9 threshold would absorb a few percent of paths that should not be absorbed.
    let m3_cfg = |t_max| SimConfig { x_abs: 1e-300, ..cfg(t_max, dt) };
    let s = stationary_estimate(&m, &m3_cfg(75.0), 1.0, 25.0, 50.0, 10_000, threads).expect("stationary");
    let f = TestFunction::Clip { lo: 0.0, hi: 10.0 };
    let ensemble = s.ensemble_mean(&f);
    let erg = ergodic_average(&m, &m3_cfg(ERGODIC_T), 1.0, &f, ERGODIC_T, 0).expect("ergodic");
    let rel = (erg.value - ensemble.mean).abs() / ensemble.mean;
    let ratio_ok = (2.7..=3.3).contains(&s.moment_ratio.mean);
    let residual_ok = s.residual.mean.abs() <= 3.0 * s.residual.stderr;
    let pass = ratio_ok && residual_ok && !erg.partial && rel <= 0.05 && s.ks_statistic <= 0.05;
    let detail = format!(
        "M3 E[X^2]/E[X] = {:.4}±{:.4} (in [2.7, 3.3]); residual {:.4}±{:.4}; ergodic {:.4} vs ensemble {:.4} ({:.2}%); KS(50, 75) = {:.4}",
        s.moment_ratio.mean,
        s.moment_ratio.stderr,
        s.residual.mean,
        s.residual.stderr,
        erg.value,
        ensemble.mean,
        100.0 * rel,
        s.ks_statistic
    );
    let extra = format!("{:e},{:e}\n", erg.value, s.ks_statistic);
    Outcome::new(pass, detail, vec![s.moment_ratio, s.residual, s.mean, ensemble], &extra)
}

fn criterion_9(threads: usize, dt: f64) -> Outcome {
    let e = running_minimum_fraction(&eta_zero_model(), &cfg(200.0, dt), 1.0, 0.05, 200.0, 5_000, threads)
        .expect("running minimum");
    let pass = e.mean >= 0.9;
    let detail = format!(
        "eta=0 model: fraction with running minimum < 0.05 by T=200 = {:.4} (>= 0.9; finite-horizon surrogate for liminf X_t = 0)",
        e.mean
    );
    Outcome::new(pass, detail, vec![e], "")
}

type Criterion = fn(usize, f64) -> Outcome;

const CRITERIA: [(u32, &str, Criterion); 9] = [
    (1, "Feller absorption oracle", criterion_1),
    (2, "exponential martingale invariance", criterion_2),
    (3, "I_a -> I limit", criterion_3),
    (4, "a.s. extinction of M1", criterion_4),
    (5, "sub-case decay bound", criterion_5),
    (6, "polynomial decay regime", criterion_6),
    (7, "GVFG divergence", criterion_7),
    (8, "stationarity of M3", criterion_8),
    (9, "oscillation regime", criterion_9),
];

fn line(id: u32, name: &str, pass: bool, detail: &str, secs: f64) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} {tag} {name}: {detail} [{secs:.1}s]");
}

/// `ACCEPTANCE_ONLY=3,8` runs just those criteria (10 means the reruns of the selected ones).
fn selected() -> Option<Vec<u32>> {
    let v = std::env::var("ACCEPTANCE_ONLY").ok()?;
    Some(v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

fn main() -> ExitCode {
    let only = selected();
    let wanted = |id: u32| only.as_ref().is_none_or(|o| o.contains(&id));
    let criteria: Vec<_> = CRITERIA.into_iter().filter(|c| wanted(c.0)).collect();
    let mut all_pass = true;
    let mut baseline = Vec::new();
    for &(id, name, run) in &criteria {
        let start = Instant::now();
        let out = run(1, DT);
        line(id, name, out.pass, &out.detail, start.elapsed().as_secs_f64());
        all_pass &= out.pass;
        baseline.push(out);
    }

    if !wanted(10) {
        return finish(all_pass);
    }
    let start = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for ((id, _, run), base) in criteria.iter().zip(&baseline) {
        let threaded = run(8, DT);
        if threaded.bytes != base.bytes {
            pass = false;
            write!(detail, " #{id} differs under 8 threads;").unwrap();
        }
        let halved = run(1, DT / 2.0);
        for (a, b) in base.estimates.iter().zip(&halved.estimates) {
            let shift = (b.mean - a.mean).abs();
            if !(shift < a.ci_width()) {
                pass = false;
                write!(
                    detail,
                    " #{id} {} moved {:.3e} >= CI width {:.3e} under dt/2;",
                    a.quantity,
                    shift,
                    a.ci_width()
                )
                .unwrap();
            }
        }
    }
    if detail.is_empty() {
        detail = " outputs byte-identical under 1 and 8 threads; every estimate moved by less than its CI width under dt/2".into();
    }
    line(10, "determinism and step robustness", pass, detail.trim(), start.elapsed().as_secs_f64());
    finish(all_pass && pass)
}

fn finish(all_pass: bool) -> ExitCode {
    if all_pass {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
