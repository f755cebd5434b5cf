//! Grid surrogates for the absorption, explosion and long-time growth
//! conditions, the decay-rate bounds for the survival probability, and a
//! classifier that chains them into qualitative conclusions.
//!
//! Every condition here is asymptotic or universally quantified over the half
//! line. A verdict only says what holds on the supplied grid.

use std::fmt;
use std::io::{self, Write};

use crate::criteria::{eval_h, ia_integrand};
use crate::error::{domain, Error, Result};
use crate::model::ModelSpec;

pub const CAVEAT: &str = "numeric surrogate of an asymptotic condition";

/// Default exponents scanned for the small/large-noise conditions.
pub const DEFAULT_A_SCAN: [f64; 6] = [0.25, 0.5, 0.75, 1.25, 1.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditionId {
    Sn0,
    Ln0,
    SnInf,
    LnInf,
    Lsg,
    Lfg,
    Gsg,
    Gfg,
    Gvfg,
}

impl ConditionId {
    pub const ALL: [ConditionId; 9] = [
        ConditionId::Sn0,
        ConditionId::Ln0,
        ConditionId::SnInf,
        ConditionId::LnInf,
        ConditionId::Lsg,
        ConditionId::Lfg,
        ConditionId::Gsg,
        ConditionId::Gfg,
        ConditionId::Gvfg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConditionId::Sn0 => "SN0",
            ConditionId::Ln0 => "LN0",
            ConditionId::SnInf => "SN_INF",
            ConditionId::LnInf => "LN_INF",
            ConditionId::Lsg => "LSG",
            ConditionId::Lfg => "LFG",
            ConditionId::Gsg => "GSG",
            ConditionId::Gfg => "GFG",
            ConditionId::Gvfg => "GVFG",
        }
    }

    /// Whether the condition takes the exponent `a`.
    pub fn uses_a(self) -> bool {
        matches!(self, ConditionId::Sn0 | ConditionId::Ln0 | ConditionId::SnInf | ConditionId::LnInf)
    }

    /// Whether `a` must lie in `𝒜` (as opposed to `(0, 1)`).
    fn needs_a_above_one(self) -> bool {
        matches!(self, ConditionId::Sn0 | ConditionId::LnInf)
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Free constants of a condition. Unset thresholds default to the grid ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionParams {
    pub a: Option<f64>,
    pub eta: Option<f64>,
    pub x0: Option<f64>,
    pub x1: Option<f64>,
    pub r_lower: Option<f64>,
    /// Slack `c` in the `|expr| <= c |ln x|` surrogate for `o(ln x)`.
    pub slack: f64,
}

impl Default for ConditionParams {
    fn default() -> Self {
        Self {
            a: None,
            eta: None,
            x0: None,
            x1: None,
            r_lower: None,
            slack: 0.1,
        }
    }
}

impl ConditionParams {
    pub fn with_a(mut self, a: f64) -> Self {
        self.a = Some(a);
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn with_r_lower(mut self, r: f64) -> Self {
        self.r_lower = Some(r);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    SatisfiedOnGrid,
    ViolatedOnGrid,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::SatisfiedOnGrid => "satisfied-on-grid",
            Verdict::ViolatedOnGrid => "violated-on-grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub condition: ConditionId,
    /// Parameters with defaults resolved.
    pub params: ConditionParams,
    pub grid: Vec<f64>,
    /// Signed so that `margin >= 0` means the condition holds at that point.
    pub margin: Vec<f64>,
    pub verdict: Verdict,
    /// Grid points outside the condition's range, with the reason.
    pub rejected: Vec<(f64, String)>,
    pub caveat: &'static str,
}

impl RegimeReport {
    pub fn satisfied(&self) -> bool {
        self.verdict == Verdict::SatisfiedOnGrid
    }

    pub fn min_margin(&self) -> f64 {
        self.margin.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub const REGIME_CSV_HEADER: &str = "condition,a,eta,x,margin";

pub fn write_regime_csv<W: Write>(mut out: W, reports: &[RegimeReport]) -> io::Result<()> {
    writeln!(out, "{REGIME_CSV_HEADER}")?;
    for r in reports {
        let a = r.params.a.map(|v| v.to_string()).unwrap_or_default();
        let eta = r.params.eta.map(|v| v.to_string()).unwrap_or_default();
        for (x, m) in r.grid.iter().zip(&r.margin) {
            writeln!(out, "{},{a},{eta},{x:e},{m:e}", r.condition)?;
        }
    }
    Ok(())
}

/// `g/x - a σ²/x² - p I_a(x)`; with `with_catastrophe` also `- r (1 - 𝔼[Θ^{1-a}])/(1-a)`.
fn noise_expression(m: &ModelSpec, x: f64, a: f64, with_catastrophe: bool) -> Result<f64> {
    let mut v = m.g().eval(x) / x - a * m.sigma2().eval(x) / (x * x);
    let p = m.p().eval(x);
    if p != 0.0 {
        v -= p * m.pi().integrate(|z| ia_integrand(a, z / x))?;
    }
    if with_catastrophe {
        let r = m.r().eval(x);
        if r != 0.0 {
            v -= r * m.kappa().one_minus_moment(1.0 - a)? / (1.0 - a);
        }
    }
    Ok(v)
}

/// `g/(x r) + 𝔼[ln Θ]`, plus the GVFG fluctuation terms when `very_fast`.
fn growth_ratio(m: &ModelSpec, x: f64, r: f64, log_theta: f64, very_fast: bool) -> Result<f64> {
    let mut v = m.g().eval(x) / (x * r) + log_theta;
    if very_fast {
        v -= 2.0 * m.sigma2().eval(x) / (x * x * r);
        let p = m.p().eval(x);
        if p != 0.0 {
            let jump = m.pi().integrate(|z| {
                let y = z / x;
                y * y / (1.0 + y)
            })?;
            v -= p / r * jump;
        }
    }
    Ok(v)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(domain("check_condition", "grid is empty"));
    }
    if grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("check_condition", "grid must be positive and strictly increasing"));
    }
    Ok(())
}

fn require_a(c: ConditionId, m: &ModelSpec, a: Option<f64>) -> Result<f64> {
    let a = a.ok_or_else(|| domain("check_condition", format!("{c} needs the exponent a")))?;
    if c.needs_a_above_one() {
        if !(a > 1.0) {
            return Err(domain("check_condition", format!("{c} needs a > 1 in the admissible set, got {a}")));
        }
        // a ∈ 𝒜 iff E[Θ^{1-a}] < ∞
        m.kappa().moment(1.0 - a)?;
    } else if !(a > 0.0 && a < 1.0) {
        return Err(domain("check_condition", format!("{c} needs 0 < a < 1, got {a}")));
    }
    Ok(a)
}

fn require_eta(c: ConditionId, eta: Option<f64>, strict: bool) -> Result<f64> {
    let eta = eta.ok_or_else(|| domain("check_condition", format!("{c} needs eta")))?;
    if eta < 0.0 || (strict && eta == 0.0) || !eta.is_finite() {
        let rel = if strict { "> 0" } else { ">= 0" };
        return Err(domain("check_condition", format!("{c} needs eta {rel}, got {eta}")));
    }
    Ok(eta)
}

/// Default `r̲`: the smallest rate over `{0} ∪ grid`, or the smallest positive
/// float when that is not positive (every margin then fails the floor).
fn default_r_lower(m: &ModelSpec, grid: &[f64]) -> f64 {
    let min = std::iter::once(0.0)
        .chain(grid.iter().copied())
        .map(|x| m.r().eval(x))
        .fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        min
    } else {
        f64::MIN_POSITIVE
    }
}

/// Evaluate one condition on a grid.
///
/// * SN0 / SN∞: the expression is compared with `∓ slack · |ln x|` on the
///   grid's extreme decade (lowest for SN0, highest for SN∞).
/// * LN0: `expr <= -ln(1/x) (ln ln(1/x))^{1+η}` for grid points `x <= x0`.
/// * LN∞: `expr >= ln x (ln ln x)^{1+η}` for grid points `x >= x0`.
/// * LSG / LFG: `H(x) <= -η` for `x >= x0`, `H(x) >= η` for `x <= x1`.
/// * GSG / GFG / GVFG: the growth ratio against `∓η` on the whole grid, with
///   `r(x) >= r̲` required pointwise (a failing point gets margin `r(x) - r̲`).
pub fn check_condition(m: &ModelSpec, c: ConditionId, params: ConditionParams, grid: &[f64]) -> Result<RegimeReport> {
    check_grid(grid)?;
    let mut resolved = params;
    let mut xs = Vec::new();
    let mut margin = Vec::new();
    let mut rejected = Vec::new();
    let lo = grid[0];
    let hi = *grid.last().expect("non-empty");
    match c {
        ConditionId::Sn0 | ConditionId::SnInf => {
            let a = require_a(c, m, params.a)?;
            for &x in grid {
                let in_decade = if c == ConditionId::Sn0 { x <= 10.0 * lo } else { x >= hi / 10.0 };
                if !in_decade {
                    continue;
                }
                let bound = params.slack * x.ln().abs();
                if c == ConditionId::Sn0 {
                    let e = noise_expression(m, x, a, false)?;
                    margin.push(e + bound);
                } else {
                    let e = noise_expression(m, x, a, true)?;
                    margin.push(bound - e);
                }
                xs.push(x);
            }
        }
        ConditionId::Ln0 | ConditionId::LnInf => {
            let a = require_a(c, m, params.a)?;
            let eta = require_eta(c, params.eta, true)?;
            let threshold = if c == ConditionId::Ln0 {
                params.x0.unwrap_or(hi)
            } else {
                params.x0.unwrap_or(lo)
            };
            resolved.x0 = Some(threshold);
            for &x in grid {
                let (in_range, l) = if c == ConditionId::Ln0 {
                    (x <= threshold, (1.0 / x).ln())
                } else {
                    (x >= threshold, x.ln())
                };
                if !in_range {
                    continue;
                }
                let ll = l.ln();
                if !(l > 0.0 && ll >= 0.0) {
                    rejected.push((x, "ln ln is not real and non-negative here".to_string()));
                    continue;
                }
                let bound = l * ll.powf(1.0 + eta);
                if c == ConditionId::Ln0 {
                    let e = noise_expression(m, x, a, false)?;
                    margin.push(-bound - e);
                } else {
                    let e = noise_expression(m, x, a, true)?;
                    margin.push(e - bound);
                }
                xs.push(x);
            }
        }
        ConditionId::Lsg | ConditionId::Lfg => {
            let eta = require_eta(c, params.eta, true)?;
            if c == ConditionId::Lsg {
                let x0 = params.x0.unwrap_or(lo);
                resolved.x0 = Some(x0);
                for &x in grid.iter().filter(|&&x| x >= x0) {
                    margin.push(-eta - eval_h(m, x)?.value);
                    xs.push(x);
                }
            } else {
                let x1 = params.x1.unwrap_or(hi);
                resolved.x1 = Some(x1);
                for &x in grid.iter().filter(|&&x| x <= x1) {
                    margin.push(eval_h(m, x)?.value - eta);
                    xs.push(x);
                }
            }
        }
        ConditionId::Gsg | ConditionId::Gfg | ConditionId::Gvfg => {
            let eta = require_eta(c, params.eta, c == ConditionId::Gfg)?;
            let r_lower = params.r_lower.unwrap_or_else(|| default_r_lower(m, grid));
            if !(r_lower > 0.0) {
                return Err(domain("check_condition", format!("{c} needs r_lower > 0, got {r_lower}")));
            }
            resolved.r_lower = Some(r_lower);
            let log_theta = m.kappa().log_moment(0.0)?;
            for &x in grid {
                let r = m.r().eval(x);
                let mg = if r < r_lower {
                    r - r_lower
                } else {
                    let ratio = growth_ratio(m, x, r, log_theta, c == ConditionId::Gvfg)?;
                    if c == ConditionId::Gsg {
                        -eta - ratio
                    } else {
                        ratio - eta
                    }
                };
                margin.push(mg);
                xs.push(x);
            }
        }
    }
    if xs.is_empty() {
        return Err(domain("check_condition", format!("no grid point lies in the range of {c}")));
    }
    if let Some(i) = margin.iter().position(|v| v.is_nan()) {
        return Err(domain("check_condition", format!("{c} margin is NaN at x = {}", xs[i])));
    }
    let verdict = if margin.iter().all(|&v| v >= 0.0) {
        Verdict::SatisfiedOnGrid
    } else {
        Verdict::ViolatedOnGrid
    };
    Ok(RegimeReport {
        condition: c,
        params: resolved,
        grid: xs,
        margin,
        verdict,
        rejected,
        caveat: CAVEAT,
    })
}

/// Outcome of checking an `a`-dependent condition over several exponents.
#[derive(Debug, Clone)]
pub struct AScan {
    pub condition: ConditionId,
    pub reports: Vec<RegimeReport>,
    /// Exponents skipped because they are inadmissible for this condition.
    pub skipped: Vec<(f64, String)>,
}

impl AScan {
    pub fn succeeded(&self) -> Vec<f64> {
        self.reports
            .iter()
            .filter(|r| r.satisfied())
            .filter_map(|r| r.params.a)
            .collect()
    }

    pub fn best(&self) -> Option<&RegimeReport> {
        self.reports
            .iter()
            .find(|r| r.satisfied())
            .or_else(|| self.reports.iter().max_by(|a, b| a.min_margin().total_cmp(&b.min_margin())))
    }
}

/// Check an `a`-dependent condition for each admissible exponent in `a_values`.
pub fn scan_a(m: &ModelSpec, c: ConditionId, params: ConditionParams, grid: &[f64], a_values: &[f64]) -> Result<AScan> {
    if !c.uses_a() {
        return Err(domain("scan_a", format!("{c} does not depend on a")));
    }
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for &a in a_values {
        match check_condition(m, c, params.with_a(a), grid) {
            Ok(r) => reports.push(r),
            Err(e @ (Error::Domain { .. } | Error::InfiniteMoment(_))) => skipped.push((a, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    Ok(AScan {
        condition: c,
        reports,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateCase {
    /// `𝔼[(Θ-1) ln Θ] < η`
    Sub,
    /// `𝔼[(Θ-1) ln Θ] = η`
    Critical,
    /// `𝔼[(Θ-1) ln Θ] > η`
    Weak,
    EtaZero,
}

impl RateCase {
    pub fn label(self) -> &'static str {
        match self {
            RateCase::Sub => "sub",
            RateCase::Critical => "critical",
            RateCase::Weak => "weak",
            RateCase::EtaZero => "eta-zero",
        }
    }
}

/// Upper envelope `P_x(X_t > 0) = O(t^{poly_power} e^{exponent t})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBound {
    pub case: RateCase,
    pub exponent: f64,
    pub poly_power: f64,
    pub tau: Option<f64>,
}

impl RateBound {
    /// A non-negative exponent with no decaying polynomial factor bounds nothing.
    pub fn is_vacuous(&self) -> bool {
        self.exponent > 0.0 || (self.exponent == 0.0 && self.poly_power == 0.0)
    }
}

const CRITICAL_TOL: f64 = 1e-12;
const BISECTION_TOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;

/// Decay-rate bound for the survival probability under GSG with `(η, r̲)`.
///
/// Holding GSG with these constants, and `inf σ²(x)/x > 0`, are the caller's
/// responsibility; see [`check_condition`].
pub fn decay_rate_bounds(m: &ModelSpec, eta: f64, r_lower: f64) -> Result<RateBound> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(domain("decay_rate_bounds", format!("eta = {eta} must be finite and >= 0")));
    }
    if !(r_lower > 0.0 && r_lower.is_finite()) {
        return Err(domain("decay_rate_bounds", format!("r_lower = {r_lower} must be finite and > 0")));
    }
    if eta == 0.0 {
        return Ok(RateBound {
            case: RateCase::EtaZero,
            exponent: 0.0,
            poly_power: -0.5,
            tau: None,
        });
    }
    let kappa = m.kappa();
    let log_theta = kappa.log_moment(0.0)?;
    let log_inv_theta = -log_theta;
    // E[(Θ - 1) ln Θ]
    let spread = kappa.log_moment(1.0)? - log_theta;
    let tol = CRITICAL_TOL * eta.max(1.0);
    let base = r_lower * (log_inv_theta - eta - 0.5);
    if spread < eta - tol {
        return Ok(RateBound {
            case: RateCase::Sub,
            exponent: base,
            poly_power: 0.0,
            tau: None,
        });
    }
    if (spread - eta).abs() <= tol {
        return Ok(RateBound {
            case: RateCase::Critical,
            exponent: base,
            poly_power: -0.5,
            tau: None,
        });
    }
    let phi = |tau: f64| -> Result<f64> { Ok(log_inv_theta - eta + kappa.log_moment(tau)?) };
    let tau = bisect_increasing(phi, 0.0, 1.0 - 1e-12)?;
    let exponent = r_lower * (log_inv_theta - eta - kappa.one_minus_moment(tau)?);
    Ok(RateBound {
        case: RateCase::Weak,
        exponent,
        poly_power: -1.5,
        tau: Some(tau),
    })
}

/// Root of an increasing function with `f(lo) < 0 < f(hi)`.
fn bisect_increasing(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if !(f_lo < 0.0) {
        return Err(Error::NoRoot(format!("phi({lo}) = {f_lo} is not negative")));
    }
    if !(f_hi > 0.0) {
        return Err(Error::NoRoot(format!(
            "phi({hi}) = {f_hi} is not positive; inconsistent with the weak case"
        )));
    }
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grids for [`classify`]: one approaching 0, one extending to large values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grids {
    pub near_zero: Vec<f64>,
    pub large: Vec<f64>,
}

impl Grids {
    pub fn union(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.near_zero.iter().chain(&self.large).copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyParams {
    pub a_values: Vec<f64>,
    /// `η` for LN0 and LN∞.
    pub eta_noise: f64,
    /// `η` for LSG and LFG.
    pub eta_local: f64,
    /// `η` for GSG, GFG and GVFG.
    pub eta_global: f64,
    pub r_lower: Option<f64>,
    pub slack: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            a_values: DEFAULT_A_SCAN.to_vec(),
            eta_noise: 0.1,
            eta_local: 0.01,
            eta_global: 0.01,
            r_lower: None,
            slack: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topic {
    Absorption,
    Explosion,
    LongTime,
}

impl Topic {
    fn label(self) -> &'static str {
        match self {
            Topic::Absorption => "absorption",
            Topic::Explosion => "explosion",
            Topic::LongTime => "long-time",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conclusion {
    pub topic: Topic,
    pub statement: String,
    pub hypotheses: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ClassifySummary {
    pub reports: Vec<RegimeReport>,
    pub conclusions: Vec<Conclusion>,
    pub inconclusive: Vec<Topic>,
    pub notes: Vec<String>,
}

impl ClassifySummary {
    pub fn report(&self, c: ConditionId) -> Option<&RegimeReport> {
        self.reports.iter().find(|r| r.condition == c && r.satisfied()).or_else(|| {
            self.reports.iter().find(|r| r.condition == c)
        })
    }

    pub fn holds(&self, c: ConditionId) -> bool {
        self.reports.iter().any(|r| r.condition == c && r.satisfied())
    }

    pub fn concludes(&self, fragment: &str) -> bool {
        self.conclusions.iter().any(|c| c.statement.contains(fragment))
    }
}

impl fmt::Display for ClassifySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "conditions ({CAVEAT}):")?;
        for r in &self.reports {
            let a = r.params.a.map(|a| format!(" a={a}")).unwrap_or_default();
            let eta = r.params.eta.map(|e| format!(" eta={e}")).unwrap_or_default();
            writeln!(
                f,
                "  {:<7}{a}{eta}: {} (min margin {:.6e} over {} points)",
                r.condition.name(),
                r.verdict.label(),
                r.min_margin(),
                r.grid.len()
            )?;
        }
        writeln!(f, "conclusions:")?;
        for c in &self.conclusions {
            writeln!(f, "  [{}] {}", c.topic.label(), c.statement)?;
            for h in &c.hypotheses {
                writeln!(f, "      because: {h}")?;
            }
        }
        for t in &self.inconclusive {
            writeln!(f, "  [{}] inconclusive on supplied grids", t.label())?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

fn describe(r: &RegimeReport) -> String {
    let mut s = format!("{} {}", r.condition.name(), r.verdict.label());
    if let Some(a) = r.params.a {
        s.push_str(&format!(" with a={a}"));
    }
    if let Some(eta) = r.params.eta {
        s.push_str(&format!(" eta={eta}"));
    }
    s.push_str(&format!(" (min margin {:.4e})", r.min_margin()));
    s
}

/// Run every condition check and state the conclusions they support.
pub fn classify(m: &ModelSpec, params: &ClassifyParams, grids: &Grids) -> Result<ClassifySummary> {
    check_grid(&grids.near_zero)?;
    check_grid(&grids.large)?;
    let all = grids.union();
    let base = ConditionParams {
        slack: params.slack,
        r_lower: params.r_lower,
        ..ConditionParams::default()
    };
    let mut reports = Vec::new();
    let mut notes = Vec::new();

    let mut scan = |c: ConditionId, grid: &[f64], eta: Option<f64>, reports: &mut Vec<RegimeReport>| -> Result<Option<RegimeReport>> {
        let p = ConditionParams { eta, ..base };
        let s = scan_a(m, c, p, grid, &params.a_values)?;
        for (a, why) in &s.skipped {
            if c.needs_a_above_one() == (*a > 1.0) {
                notes.push(format!("{c}: a={a} skipped: {why}"));
            }
        }
        let best = s.best().cloned();
        if let Some(b) = &best {
            reports.push(b.clone());
        }
        Ok(best.filter(|b| b.satisfied()))
    };
    let sn0 = scan(ConditionId::Sn0, &grids.near_zero, None, &mut reports)?;
    let ln0 = scan(ConditionId::Ln0, &grids.near_zero, Some(params.eta_noise), &mut reports)?;
    let sn_inf = scan(ConditionId::SnInf, &grids.large, None, &mut reports)?;
    let ln_inf = scan(ConditionId::LnInf, &grids.large, Some(params.eta_noise), &mut reports)?;

    let single = |c: ConditionId, grid: &[f64], eta: f64, reports: &mut Vec<RegimeReport>| -> Result<Option<RegimeReport>> {
        let r = check_condition(m, c, base.with_eta(eta), grid)?;
        reports.push(r.clone());
        Ok(Some(r).filter(|r| r.satisfied()))
    };
    let lsg = single(ConditionId::Lsg, &grids.large, params.eta_local, &mut reports)?;
    let lfg = single(ConditionId::Lfg, &grids.near_zero, params.eta_local, &mut reports)?;
    let gsg = single(ConditionId::Gsg, &all, params.eta_global, &mut reports)?;
    let gfg = if params.eta_global > 0.0 {
        single(ConditionId::Gfg, &all, params.eta_global, &mut reports)?
    } else {
        None
    };
    let gvfg = single(ConditionId::Gvfg, &all, params.eta_global, &mut reports)?;

    let r_positive = all.iter().all(|&x| m.r().eval(x) > 0.0);
    let p_positive = all.iter().all(|&x| m.p().eval(x) > 0.0);
    let noise_positive = all.iter().all(|&x| m.sigma2().eval(x) > 0.0 || m.p().eval(x) > 0.0);

    let mut conclusions = Vec::new();
    let mut inconclusive = Vec::new();
    let mut push = |topic, statement: &str, hyps: Vec<String>| {
        conclusions.push(Conclusion {
            topic,
            statement: statement.to_string(),
            hypotheses: hyps,
        })
    };

    // Absorption.
    let mut absorption = false;
    if let Some(r) = &sn0 {
        push(Topic::Absorption, "no absorption: P_x(tau-(0) < inf) = 0 for all x > 0", vec![describe(r)]);
        absorption = true;
    } else if let Some(r) = &gvfg {
        push(
            Topic::Absorption,
            "no absorption: P_x(tau-(0) < inf) = 0 for all x > 0 (GVFG implies SN0)",
            vec![describe(r)],
        );
        absorption = true;
    }
    if let Some(r) = &ln0 {
        let statement = if r_positive {
            "absorption possible: P_x(tau-(0) < inf) > 0 for all x > 0"
        } else {
            "absorption possible: P_x(tau-(0) < inf) > 0 for small x"
        };
        let mut h = vec![describe(r)];
        if r_positive {
            h.push("r > 0 on grid".into());
        }
        push(Topic::Absorption, statement, h);
        absorption = true;
    }
    if !absorption {
        inconclusive.push(Topic::Absorption);
    }

    // Explosion.
    let mut explosion = false;
    if let Some(r) = &sn_inf {
        push(Topic::Explosion, "no explosion: P_x(tau+(inf) < inf) = 0 for all x > 0", vec![describe(r)]);
        explosion = true;
    }
    if let Some(r) = &ln_inf {
        let statement = if noise_positive {
            "explosion possible: P_x(tau+(inf) < inf) > 0 for all x > 0"
        } else {
            "explosion possible: P_x(tau+(inf) < inf) > 0 for large x"
        };
        let mut h = vec![describe(r)];
        if noise_positive {
            h.push("sigma + p > 0 on grid".into());
        }
        push(Topic::Explosion, statement, h);
        explosion = true;
    }
    if !explosion {
        inconclusive.push(Topic::Explosion);
    }

    // Long-time behaviour.
    let mut long_time = false;
    if let (Some(a), Some(b)) = (&sn0, &sn_inf) {
        if let Some(g) = lsg.as_ref().or(lfg.as_ref()) {
            push(
                Topic::LongTime,
                "converges in law to the unique stationary distribution; ergodic averages converge",
                vec![describe(a), describe(b), describe(g)],
            );
            long_time = true;
        }
    }
    if let (Some(a), Some(b), Some(c)) = (&sn_inf, &ln0, &lsg) {
        if r_positive {
            push(
                Topic::LongTime,
                "a.s. extinction (long-time extinction hypotheses satisfied-on-grid)",
                vec![describe(a), describe(b), describe(c), "r > 0 on grid".into()],
            );
            long_time = true;
        }
    }
    if let (Some(a), Some(b), Some(c)) = (&sn0, &ln_inf, &lfg) {
        if p_positive {
            push(
                Topic::LongTime,
                "a.s. explosion (long-time explosion hypotheses satisfied-on-grid)",
                vec![describe(a), describe(b), describe(c), "p > 0 on grid".into()],
            );
            long_time = true;
        }
    }
    if let Some(r) = &gsg {
        let statement = if params.eta_global > 0.0 {
            "X_t -> 0 almost surely"
        } else {
            "liminf X_t = 0 almost surely"
        };
        push(Topic::LongTime, statement, vec![describe(r)]);
        long_time = true;
        let sigma_floor = all.iter().map(|&x| m.sigma2().eval(x) / x).fold(f64::INFINITY, f64::min);
        if sigma_floor > 0.0 {
            let bound = decay_rate_bounds(m, params.eta_global, r.params.r_lower.expect("resolved"))?;
            let mut statement = format!(
                "P_x(X_t > 0) = O(t^{} exp({:.6} t)) [case {}]",
                bound.poly_power,
                bound.exponent,
                bound.case.label()
            );
            if bound.is_vacuous() {
                statement.push_str("; bound is vacuous for these parameters");
            }
            push(
                Topic::LongTime,
                &statement,
                vec![describe(r), format!("inf sigma^2(x)/x = {sigma_floor:.4e} > 0 on grid")],
            );
        }
    }
    if let Some(r) = &gvfg {
        let statement = if params.eta_global > 0.0 {
            "X_t -> infinity almost surely"
        } else {
            "limsup X_t = infinity almost surely"
        };
        push(Topic::LongTime, statement, vec![describe(r)]);
        long_time = true;
        if params.eta_global > 0.0 {
            // GVFG implies GFG with the same eta.
            debug_assert!(gfg.is_some(), "GVFG satisfied but GFG violated");
            push(Topic::LongTime, "GFG holds (implied by GVFG)", vec![describe(r)]);
        }
    } else if let Some(r) = &gfg {
        let bounded = all
            .iter()
            .map(|&x| (m.sigma2().eval(x) + m.p().eval(x)) / x)
            .fold(0.0, f64::max);
        push(
            Topic::LongTime,
            "P_x(liminf X_t > 0) > 0",
            vec![
                describe(r),
                format!("sup (sigma^2 + p)/x on grid = {bounded:.4e}"),
                "requires int z ln^{1+eps}(1+z) pi(dz) < inf".into(),
            ],
        );
        long_time = true;
    }
    if !long_time {
        inconclusive.push(Topic::LongTime);
    }

    Ok(ClassifySummary {
        reports,
        conclusions,
        inconclusive,
        notes,
    })
}
