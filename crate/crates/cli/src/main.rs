//! `csbp`: run model checks, regime classification and Monte Carlo
//! experiments from a TOML config file.

mod config;
mod error;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csbp_core::criteria::{eval_g_a, eval_h, write_criterion_csv};
use csbp_core::model::{hex_digest, validate_assumptions};
use csbp_core::montecarlo::{
    estimate_event_prob, martingale_check, survival_decay_fit, write_estimate_csv, write_survival_csv,
};
use csbp_core::regimes::{classify, decay_rate_bounds, write_regime_csv};
use csbp_core::simulate::{simulate_path, write_event_csv, write_path_csv, Outcome};

use crate::config::{require, RunConfig};
use crate::error::CliError;

/// Environment variable that overrides the configured output directory.
const OUT_DIR_ENV: &str = "CSBP_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "csbp", version, about = "Branching processes with catastrophes: checks, regimes, simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for Monte Carlo (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output directory; overrides CSBP_OUT_DIR and `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the model against the structural assumptions.
    Validate,
    /// Sweep G_a and H over the grids.
    Criteria,
    /// Check every regime condition and print the supported conclusions.
    Classify,
    /// Simulate and store one path.
    Simulate,
    /// Estimate event probabilities.
    Estimate,
    /// Fit the survival decay and compare it with the rate bound.
    Decay,
    /// Check the exponential martingale at the given checkpoints.
    Martingale,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Criteria => "criteria",
            Command::Classify => "classify",
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::Decay => "decay",
            Command::Martingale => "martingale",
        }
    }
}

struct Context {
    cfg: RunConfig,
    digest: String,
    seed: Option<u64>,
    threads: usize,
    out_dir: PathBuf,
}

impl Context {
    /// Write `body` under the standard comment header.
    fn emit(&self, name: &str, seed: u64, body: &[u8]) -> Result<(), CliError> {
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source| CliError::Io { path, source }
        };
        fs::create_dir_all(&self.out_dir).map_err(io_err(&self.out_dir))?;
        let path = self.out_dir.join(name);
        let mut file = Vec::with_capacity(body.len() + 128);
        writeln!(file, "# csbp {}", env!("CARGO_PKG_VERSION")).expect("in-memory write");
        writeln!(file, "# config-digest: {}", self.digest).expect("in-memory write");
        writeln!(file, "# seed: {seed}").expect("in-memory write");
        file.extend_from_slice(body);
        fs::write(&path, file).map_err(io_err(&path))?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut v = Vec::new();
    f(&mut v).expect("in-memory write");
    v
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .clone()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let text = fs::read_to_string(&path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let cfg = RunConfig::parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.output_dir())
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = Context {
        digest: hex_digest(text.as_bytes()),
        cfg,
        seed: cli.seed,
        threads: cli.threads,
        out_dir,
    };
    let name = cli.command.name();
    match cli.command {
        Command::Validate => validate(&ctx, name),
        Command::Criteria => criteria(&ctx, name),
        Command::Classify => classify_cmd(&ctx, name),
        Command::Simulate => simulate(&ctx, name),
        Command::Estimate => estimate(&ctx, name),
        Command::Decay => decay(&ctx, name),
        Command::Martingale => martingale(&ctx, name),
    }
}

fn validate(ctx: &Context, name: &str) -> Result<(), CliError> {
    let m = ctx.cfg.model(name)?;
    let grid = match ctx.cfg.grids {
        Some(_) => ctx.cfg.grids(name)?.union(),
        None => (-6..=4).map(|k| 10f64.powi(k)).collect(),
    };
    let report = validate_assumptions(&m, &grid)?;
    print!("{report}");
    Ok(())
}

fn criteria(ctx: &Context, name: &str) -> Result<(), CliError> {
    let m = ctx.cfg.model(name)?;
    let grid = ctx.cfg.grids(name)?.union();
    let mut points = Vec::new();
    for a in ctx.cfg.criteria_a() {
        for &x in &grid {
            match eval_g_a(&m, x, a) {
                Ok(p) => points.push(p),
                Err(csbp_core::Error::InfiniteMoment(why)) => {
                    eprintln!("skipping a = {a}: {why}");
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    if ctx.cfg.include_h() {
        for &x in &grid {
            points.push(eval_h(&m, x)?);
        }
    }
    ctx.emit("criteria.csv", ctx.seed.unwrap_or(0), &buffer(|b| write_criterion_csv(b, &points)))
}

fn classify_cmd(ctx: &Context, name: &str) -> Result<(), CliError> {
    let m = ctx.cfg.model(name)?;
    let grids = ctx.cfg.grids(name)?;
    let summary = classify(&m, &ctx.cfg.classify_params(), &grids)?;
    let seed = ctx.seed.unwrap_or(0);
    ctx.emit("regimes.csv", seed, &buffer(|b| write_regime_csv(b, &summary.reports)))?;
    let text = summary.to_string();
    ctx.emit("summary.txt", seed, text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn simulate(ctx: &Context, name: &str) -> Result<(), CliError> {
    let m = ctx.cfg.model(name)?;
    let sim = ctx.cfg.sim(name, ctx.seed)?;
    let mc = ctx.cfg.mc(name)?;
    let x0 = require(mc.x0, "mc.x0")?;
    let index = mc.path_index.unwrap_or(0);
    let path = simulate_path(&m, &sim, x0, index)?;
    ctx.emit("path.csv", sim.seed, &buffer(|b| write_path_csv(b, &path)))?;
    ctx.emit("events.csv", sim.seed, &buffer(|b| write_event_csv(b, &path)))?;
    let outcome = match path.outcome {
        Outcome::Absorbed { time } => format!("absorbed at t = {time}"),
        Outcome::Exploded { time } => format!("exploded at t = {time}"),
        _ => format!("ran to horizon t = {}", sim.t_max),
    };
    println!("path {index} (stream seed {}, index {index}): {outcome}, {} events", sim.seed, path.events.len());
    Ok(())
}

fn estimate(ctx: &Context, name: &str) -> Result<(), CliError> {
    let m = ctx.cfg.model(name)?;
    let sim = ctx.cfg.sim(name, ctx.seed)?;
    let mc = ctx.cfg.mc(name)?;
    let x0 = require(mc.x0, "mc.x0")?;
    let n = require(mc.n, "mc.n")?;
    let events = mc
        .events
        .as_ref()
        .filter(|e| !e.is_empty())
        .ok_or_else(|| CliError::Config("missing key mc.events".into()))?;
    let mut estimates = Vec::new();
    for &e in events {
        let est = estimate_event_prob(&m, &sim, x0, e, n, ctx.threads)?;
        println!("{est}");
        estimates.push(est);
    }
    ctx.emit("estimates.csv", sim.seed, &buffer(|b| write_estimate_csv(b, &estimates)))
}

fn decay(ctx: &Context, name: &str) -> Result<(), CliError> {
    let m = ctx.cfg.model(name)?;
    let sim = ctx.cfg.sim(name, ctx.seed)?;
    let mc = ctx.cfg.mc(name)?;
    let x0 = require(mc.x0, "mc.x0")?;
    let n = require(mc.n, "mc.n")?;
    let eta = require(mc.eta, "mc.eta")?;
    let r_lower = require(mc.r_lower, "mc.r_lower")?;
    let tol = mc.tolerance.unwrap_or(0.1);
    let times = mc
        .times
        .clone()
        .ok_or_else(|| CliError::Config("missing key mc.times".into()))?;
    let bound = decay_rate_bounds(&m, eta, r_lower)?;
    let fit = survival_decay_fit(&m, &sim, x0, &times, bound.poly_power, n, ctx.threads)?;
    ctx.emit("survival.csv", sim.seed, &buffer(|b| write_survival_csv(b, &fit.curve)))?;
    let within = fit.within_bound(bound.exponent, tol);
    let body = format!(
        "poly_power,slope,intercept,slope_ci_lo,slope_ci_hi,bound_case,bound_exponent,tolerance,within_bound\n\
         {},{:e},{:e},{:e},{:e},{},{:e},{},{}\n",
        fit.poly_power,
        fit.slope,
        fit.intercept,
        fit.slope_ci.0,
        fit.slope_ci.1,
        bound.case.label(),
        bound.exponent,
        tol,
        within
    );
    ctx.emit("decay.csv", sim.seed, body.as_bytes())?;
    println!(
        "fitted slope {:.6} <= bound exponent {:.6} + {tol}: {} (case {}, poly power {})",
        fit.slope,
        bound.exponent,
        if within { "yes" } else { "no" },
        bound.case.label(),
        bound.poly_power
    );
    Ok(())
}

fn martingale(ctx: &Context, name: &str) -> Result<(), CliError> {
    let m = ctx.cfg.model(name)?;
    let sim = ctx.cfg.sim(name, ctx.seed)?;
    let mc = ctx.cfg.mc(name)?;
    let x0 = require(mc.x0, "mc.x0")?;
    let n = require(mc.n, "mc.n")?;
    let a = require(mc.a, "mc.a")?;
    let c = require(mc.c, "mc.c")?;
    let b = require(mc.b, "mc.b")?;
    let checkpoints = mc
        .checkpoints
        .clone()
        .ok_or_else(|| CliError::Config("missing key mc.checkpoints".into()))?;
    let budget = mc.budget.unwrap_or(0.02);
    let report = martingale_check(&m, &sim, x0, a, c, b, &checkpoints, budget, n, ctx.threads)?;
    let mut body = String::from("t,n,mean,stderr,ci_lo,ci_hi,target,deviation,flagged\n");
    for p in &report.points {
        let e = &p.estimate;
        body.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{}\n",
            p.t, e.n, e.mean, e.stderr, e.ci95.0, e.ci95.1, report.target, p.deviation, p.flagged
        ));
        println!(
            "t = {}: mean {:.6} ± {:.6}, target {:.6}, deviation {:+.6} {}",
            p.t,
            e.mean,
            e.stderr,
            report.target,
            p.deviation,
            if p.flagged { "FLAGGED" } else { "ok" }
        );
    }
    ctx.emit("martingale.csv", sim.seed, body.as_bytes())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
