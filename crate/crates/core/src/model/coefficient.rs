use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A coefficient `x ↦ f(x)` on the half line, drawn from a closed set of
/// families so that every check on it stays decidable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientFn {
    Zero,
    /// `c x`
    Linear { c: f64 },
    /// `c x^beta`, `beta >= 0`
    Power { c: f64, beta: f64 },
    /// `c0 + c1 x`
    Affine { c0: f64, c1: f64 },
    /// `c x (1 - x / k)`
    Logistic { c: f64, k: f64 },
    /// Piecewise-linear interpolation through `(xs[i], ys[i])`, flat outside the grid.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl CoefficientFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            CoefficientFn::Zero => 0.0,
            CoefficientFn::Linear { c } => c * x,
            CoefficientFn::Power { c, beta } => c * x.powf(*beta),
            CoefficientFn::Affine { c0, c1 } => c0 + c1 * x,
            CoefficientFn::Logistic { c, k } => c * x * (1.0 - x / k),
            CoefficientFn::Table { xs, ys } => interpolate(xs, ys, x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, CoefficientFn::Zero)
    }

    /// Check the family parameters; `key` names the config entry in errors.
    pub fn validate(&self, key: &str) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{key}.{name}"), "must be finite"))
            }
        };
        match self {
            CoefficientFn::Zero => Ok(()),
            CoefficientFn::Linear { c } => finite("c", *c),
            CoefficientFn::Power { c, beta } => {
                finite("c", *c)?;
                finite("beta", *beta)?;
                if *beta < 0.0 {
                    return Err(invalid(format!("{key}.beta"), "must be >= 0 so the coefficient is finite at 0"));
                }
                Ok(())
            }
            CoefficientFn::Affine { c0, c1 } => {
                finite("c0", *c0)?;
                finite("c1", *c1)
            }
            CoefficientFn::Logistic { c, k } => {
                finite("c", *c)?;
                finite("k", *k)?;
                if *k <= 0.0 {
                    return Err(invalid(format!("{key}.k"), "carrying capacity must be > 0"));
                }
                Ok(())
            }
            CoefficientFn::Table { xs, ys } => {
                if xs.len() < 2 || xs.len() != ys.len() {
                    return Err(invalid(
                        format!("{key}.xs"),
                        "table needs at least two points and matching xs/ys lengths",
                    ));
                }
                if xs.iter().chain(ys).any(|v| !v.is_finite()) {
                    return Err(invalid(format!("{key}.xs"), "table entries must be finite"));
                }
                if xs[0] < 0.0 {
                    return Err(invalid(format!("{key}.xs"), "table grid must start at x >= 0"));
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid(format!("{key}.xs"), "table grid must be strictly increasing"));
                }
                Ok(())
            }
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + w * (ys[i + 1] - ys[i])
}
