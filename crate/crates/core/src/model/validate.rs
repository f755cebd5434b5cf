use std::fmt;

use super::{CoefficientFn, JumpMeasure, ModelSpec};
use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseStatus {
    Pass,
    Fail,
    /// Grid-based check of an existence statement; no failure detected.
    HeuristicPass,
    /// Grid-based check of an existence statement; failure detected.
    HeuristicFail,
}

impl ClauseStatus {
    pub fn is_failure(self) -> bool {
        matches!(self, ClauseStatus::Fail | ClauseStatus::HeuristicFail)
    }

    pub fn label(self) -> &'static str {
        match self {
            ClauseStatus::Pass => "pass",
            ClauseStatus::Fail => "fail",
            ClauseStatus::HeuristicPass => "heuristic-pass",
            ClauseStatus::HeuristicFail => "heuristic-fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClauseResult {
    pub clause: &'static str,
    pub status: ClauseStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub clauses: Vec<ClauseResult>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| !c.status.is_failure())
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.clause == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{:<16} {}  ({})", c.status.label(), c.clause, c.detail)?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        writeln!(f, "overall: {}", if self.passed() { "pass" } else { "fail" })
    }
}

pub const G_AT_ZERO: &str = "g(0) = 0";
pub const SIGMA_AT_ZERO: &str = "sigma(0) = 0";
pub const P_AT_ZERO: &str = "p(0) = 0";
pub const R_AT_ZERO: &str = "r(0) < inf";
pub const SIGMA2_NONNEG: &str = "sigma^2 >= 0";
pub const P_NONNEG: &str = "p >= 0";
pub const R_NONNEG: &str = "r >= 0";
pub const P_MONOTONE: &str = "p non-decreasing";
pub const R_LIPSCHITZ: &str = "r locally Lipschitz";
pub const P_LIPSCHITZ: &str = "p locally Lipschitz";
pub const G_MODULUS: &str = "g has modulus x(1 - ln x)";
pub const SIGMA_HOLDER: &str = "sigma Hoelder-1/2";
pub const PI_SMALL_LARGE: &str = "int (z ^ z^2) pi(dz) < inf";
pub const PI_LOG: &str = "int ln(1+z) pi(dz) < inf";
pub const KAPPA_LOG: &str = "E|ln Theta| < inf";

// A quotient that grows at least like x^{-BLOWUP_SLOPE} towards 0 is a blowup.
const BLOWUP_SLOPE: f64 = 0.02;

fn exact(clause: &'static str, ok: bool, detail: String) -> ClauseResult {
    ClauseResult {
        clause,
        status: if ok { ClauseStatus::Pass } else { ClauseStatus::Fail },
        detail,
    }
}

fn on_grid(clause: &'static str, f: &CoefficientFn, grid: &[f64]) -> ClauseResult {
    let worst = grid
        .iter()
        .map(|&x| (x, f.eval(x)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is non-empty");
    exact(clause, worst.1 >= 0.0, format!("min {:.6e} at x = {:.6e}", worst.1, worst.0))
}

fn phi(u: f64) -> f64 {
    if u <= 1.0 {
        u * (1.0 - u.ln())
    } else {
        1.0
    }
}

/// Difference-quotient check of `|F(y) - F(x)| <= C ω(y - x)` on the grid.
///
/// Quotients anchored at 0 are fitted against `ln x` on `(0, 1]`; a negative
/// slope means the quotient blows up as `x → 0`.
fn modulus_check(clause: &'static str, f: impl Fn(f64) -> f64, omega: impl Fn(f64) -> f64, grid: &[f64]) -> ClauseResult {
    let f0 = f(0.0);
    let pairs_max = grid
        .windows(2)
        .map(|w| (f(w[1]) - f(w[0])).abs() / omega(w[1] - w[0]))
        .fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .filter(|&&x| x > 0.0 && x <= 1.0)
        .map(|&x| (x.ln(), (f(x) - f0).abs() / omega(x)))
        .collect();
    if !pairs_max.is_finite() || pts.iter().any(|p| !p.1.is_finite()) {
        return ClauseResult {
            clause,
            status: ClauseStatus::HeuristicFail,
            detail: "non-finite difference quotient on grid".into(),
        };
    }
    let positive: Vec<(f64, f64)> = pts.iter().filter(|p| p.1 > 0.0).map(|&(lx, q)| (lx, q.ln())).collect();
    if positive.len() < 2 {
        return ClauseResult {
            clause,
            status: ClauseStatus::HeuristicPass,
            detail: format!("max pair quotient {pairs_max:.3e}; too few grid points in (0,1] for a blowup fit"),
        };
    }
    let n = positive.len() as f64;
    let mx = positive.iter().map(|p| p.0).sum::<f64>() / n;
    let my = positive.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = positive.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = positive.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let status = if slope < -BLOWUP_SLOPE {
        ClauseStatus::HeuristicFail
    } else {
        ClauseStatus::HeuristicPass
    };
    ClauseResult {
        clause,
        status,
        detail: format!("log-log slope of quotient near 0: {slope:.4}; max pair quotient {pairs_max:.3e}"),
    }
}

fn pi_clauses(pi: &JumpMeasure) -> (bool, bool, String) {
    match pi {
        JumpMeasure::Zero | JumpMeasure::Atoms { .. } | JumpMeasure::Exponential { .. } => {
            (true, true, "closed form finite for this family".into())
        }
        JumpMeasure::TruncatedPower { exponent, z_max, .. } => {
            if z_max.is_finite() {
                (true, true, "compact support [z_min, z_max]".into())
            } else {
                // Tail z^{1-s} integrable iff s > 2; log tail iff s > 1.
                (*exponent > 2.0, *exponent > 1.0, format!("tail exponent {exponent}"))
            }
        }
    }
}

/// Check each structural assumption on the coefficients against the grid.
///
/// Boundary values are checked exactly, sign and monotonicity clauses on the
/// grid, regularity clauses by difference quotients (labelled heuristic), and
/// moment clauses analytically per family.
pub fn validate_assumptions(m: &ModelSpec, grid: &[f64]) -> Result<ValidationReport> {
    if grid.is_empty() {
        return Err(domain("validate_assumptions", "grid is empty"));
    }
    if grid[0] < 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("validate_assumptions", "grid must be strictly increasing and start at x >= 0"));
    }
    let mut clauses = Vec::new();
    let mut notes = Vec::new();

    let g0 = m.g().eval(0.0);
    let s0 = m.sigma2().eval(0.0);
    let p0 = m.p().eval(0.0);
    let r0 = m.r().eval(0.0);
    clauses.push(exact(G_AT_ZERO, g0 == 0.0, format!("g(0) = {g0}")));
    clauses.push(exact(SIGMA_AT_ZERO, s0 == 0.0, format!("sigma^2(0) = {s0}")));
    clauses.push(exact(P_AT_ZERO, p0 == 0.0, format!("p(0) = {p0}")));
    clauses.push(exact(R_AT_ZERO, r0.is_finite(), format!("r(0) = {r0}")));

    clauses.push(on_grid(SIGMA2_NONNEG, m.sigma2(), grid));
    clauses.push(on_grid(P_NONNEG, m.p(), grid));
    clauses.push(on_grid(R_NONNEG, m.r(), grid));

    let p = m.p();
    let drop = grid
        .windows(2)
        .find(|w| p.eval(w[1]) < p.eval(w[0]))
        .map(|w| format!("p decreases between x = {:.4e} and x = {:.4e}", w[0], w[1]));
    clauses.push(exact(
        P_MONOTONE,
        drop.is_none(),
        drop.unwrap_or_else(|| "non-decreasing on grid".into()),
    ));

    clauses.push(modulus_check(R_LIPSCHITZ, |x| m.r().eval(x), |u| u, grid));
    clauses.push(modulus_check(P_LIPSCHITZ, |x| m.p().eval(x), |u| u, grid));
    clauses.push(modulus_check(G_MODULUS, |x| m.g().eval(x), phi, grid));
    clauses.push(modulus_check(
        SIGMA_HOLDER,
        |x| m.sigma2().eval(x).max(0.0).sqrt(),
        |u| u.sqrt(),
        grid,
    ));

    let (small_large, log_ok, detail) = pi_clauses(m.pi());
    clauses.push(exact(PI_SMALL_LARGE, small_large, detail.clone()));
    clauses.push(exact(PI_LOG, log_ok, detail));
    let kappa_log = m.kappa().log_moment(0.0)?;
    clauses.push(exact(KAPPA_LOG, kappa_log.is_finite(), format!("E[ln Theta] = {kappa_log:.6}")));

    if let JumpMeasure::TruncatedPower { z_min, z_max, .. } = m.pi() {
        notes.push(format!(
            "jump measure truncated to [{z_min}, {z_max}]; jumps below z_min are omitted, not approximated"
        ));
    }
    Ok(ValidationReport { clauses, notes })
}
