use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::DiscreteTable;
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity, Tolerance};

/// Finite-activity measure `π` of positive jump sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpMeasure {
    Zero,
    /// `(z_i, w_i)` pairs: mass `w_i` at jump size `z_i`.
    Atoms { points: Vec<(f64, f64)> },
    /// Density `mass · λ e^{-λ z}` on `(0, ∞)`.
    Exponential { mass: f64, lambda: f64 },
    /// Density proportional to `z^{-exponent}` on `[z_min, z_max]`, scaled to
    /// total mass `mass`. `z_max` may be infinite. This is how heavy-tailed and
    /// infinite-activity measures are represented: truncated below at `z_min`.
    TruncatedPower {
        mass: f64,
        exponent: f64,
        z_min: f64,
        z_max: f64,
    },
}

/// `m0 = ∫π`, `m1 = ∫z π`, `m2 = ∫z² π`, `mlog = ∫ln(1+z) π`.
///
/// `m1`, `m2` and `mlog` are `+∞` when they diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpFunctionals {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub mlog: f64,
}

impl JumpFunctionals {
    pub fn finite_m1(&self) -> Result<f64> {
        if self.m1.is_finite() {
            Ok(self.m1)
        } else {
            Err(Error::InfiniteMoment("∫z π(dz) diverges".into()))
        }
    }

    pub fn finite_m2(&self) -> Result<f64> {
        if self.m2.is_finite() {
            Ok(self.m2)
        } else {
            Err(Error::InfiniteMoment("∫z² π(dz) diverges".into()))
        }
    }
}

/// `∫_a^b z^{e-1} dz`, allowing `b = ∞`.
fn power_integral(e: f64, a: f64, b: f64) -> f64 {
    if e == 0.0 {
        (b / a).ln()
    } else if b.is_infinite() {
        if e < 0.0 {
            -a.powf(e) / e
        } else {
            f64::INFINITY
        }
    } else {
        (b.powf(e) - a.powf(e)) / e
    }
}

impl JumpMeasure {
    pub fn validate(&self, key: &str) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{key}.{name}"), "must be finite and >= 0"))
            }
        };
        match self {
            JumpMeasure::Zero => Ok(()),
            JumpMeasure::Atoms { points } => {
                for (i, (z, w)) in points.iter().enumerate() {
                    if !(z.is_finite() && *z > 0.0) {
                        return Err(invalid(format!("{key}.points[{i}]"), "jump size must be finite and > 0"));
                    }
                    if !(w.is_finite() && *w >= 0.0) {
                        return Err(invalid(format!("{key}.points[{i}]"), "mass must be finite and >= 0"));
                    }
                }
                Ok(())
            }
            JumpMeasure::Exponential { mass, lambda } => {
                nonneg("mass", *mass)?;
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(invalid(format!("{key}.lambda"), "must be finite and > 0"));
                }
                Ok(())
            }
            JumpMeasure::TruncatedPower {
                mass,
                exponent,
                z_min,
                z_max,
            } => {
                nonneg("mass", *mass)?;
                if !exponent.is_finite() {
                    return Err(invalid(format!("{key}.exponent"), "must be finite"));
                }
                if !(z_min.is_finite() && *z_min > 0.0) {
                    return Err(invalid(format!("{key}.z_min"), "truncation level must be finite and > 0"));
                }
                if !(*z_max > *z_min) {
                    return Err(invalid(format!("{key}.z_max"), "must exceed z_min"));
                }
                if z_max.is_infinite() && *exponent <= 1.0 {
                    return Err(invalid(
                        format!("{key}.exponent"),
                        "untruncated tail needs exponent > 1 for finite total mass",
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            JumpMeasure::Zero => true,
            JumpMeasure::Atoms { points } => points.iter().all(|(_, w)| *w == 0.0),
            JumpMeasure::Exponential { mass, .. } | JumpMeasure::TruncatedPower { mass, .. } => *mass == 0.0,
        }
    }

    /// Whether `π` is a finite sum of atoms (integrals against it are exact sums).
    pub fn is_atomic(&self) -> bool {
        matches!(self, JumpMeasure::Zero | JumpMeasure::Atoms { .. })
    }

    fn power_norm(exponent: f64, z_min: f64, z_max: f64) -> f64 {
        power_integral(1.0 - exponent, z_min, z_max)
    }

    pub fn functionals(&self) -> Result<JumpFunctionals> {
        Ok(match self {
            JumpMeasure::Zero => JumpFunctionals {
                m0: 0.0,
                m1: 0.0,
                m2: 0.0,
                mlog: 0.0,
            },
            JumpMeasure::Atoms { points } => JumpFunctionals {
                m0: points.iter().map(|(_, w)| w).sum(),
                m1: points.iter().map(|(z, w)| w * z).sum(),
                m2: points.iter().map(|(z, w)| w * z * z).sum(),
                mlog: points.iter().map(|(z, w)| w * z.ln_1p()).sum(),
            },
            JumpMeasure::Exponential { mass, lambda } => {
                // ∫ ln(1+z) λ e^{-λz} dz = e^λ E1(λ)
                let e1 = statrs::function::exponential::integral(*lambda, 1);
                let mlog = match e1 {
                    Some(v) if (lambda.exp() * v).is_finite() => mass * lambda.exp() * v,
                    _ => self.integrate(|z| z.ln_1p())?,
                };
                JumpFunctionals {
                    m0: *mass,
                    m1: mass / lambda,
                    m2: 2.0 * mass / (lambda * lambda),
                    mlog,
                }
            }
            JumpMeasure::TruncatedPower {
                mass,
                exponent,
                z_min,
                z_max,
            } => {
                let c = mass / Self::power_norm(*exponent, *z_min, *z_max);
                let m1 = c * power_integral(2.0 - exponent, *z_min, *z_max);
                let m2 = c * power_integral(3.0 - exponent, *z_min, *z_max);
                // ln(1+z) grows slower than any power, so the log moment is
                // finite whenever the mass is.
                let mlog = self.integrate(|z| z.ln_1p())?;
                JumpFunctionals {
                    m0: *mass,
                    m1,
                    m2,
                    mlog,
                }
            }
        })
    }

    /// `∫ f(z) π(dz)`: an exact sum for atoms, adaptive quadrature for densities.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        self.integrate_with(f, Tolerance::default())
    }

    pub fn integrate_with<F: Fn(f64) -> f64>(&self, f: F, tol: Tolerance) -> Result<f64> {
        match self {
            JumpMeasure::Zero => Ok(0.0),
            JumpMeasure::Atoms { points } => Ok(points.iter().map(|(z, w)| w * f(*z)).sum()),
            JumpMeasure::Exponential { mass, lambda } => {
                if *mass == 0.0 {
                    return Ok(0.0);
                }
                let (m, l) = (*mass, *lambda);
                integrate_to_infinity(|z| f(z) * m * l * (-l * z).exp(), 0.0, 1.0 / l, tol)
            }
            JumpMeasure::TruncatedPower {
                mass,
                exponent,
                z_min,
                z_max,
            } => {
                if *mass == 0.0 {
                    return Ok(0.0);
                }
                let c = mass / Self::power_norm(*exponent, *z_min, *z_max);
                let s = *exponent;
                let dens = |z: f64| f(z) * c * z.powf(-s);
                if z_max.is_infinite() {
                    integrate_to_infinity(dens, *z_min, *z_min, tol)
                } else {
                    // Split at geometric midpoints so a wide range is not one panel.
                    let mut edges = vec![*z_min];
                    let mut e = *z_min;
                    while e * 10.0 < *z_max {
                        e *= 10.0;
                        edges.push(e);
                    }
                    edges.push(*z_max);
                    let per = Tolerance {
                        rel: tol.rel,
                        abs: tol.abs / edges.len() as f64,
                        max_subdivisions: tol.max_subdivisions,
                    };
                    edges.windows(2).map(|w| integrate(dens, w[0], w[1], per)).sum()
                }
            }
        }
    }

    /// Sampler for the normalised jump law `π / m0`; `None` when `m0 = 0`.
    pub(crate) fn sampler(&self) -> Option<JumpSampler> {
        if self.is_zero() {
            return None;
        }
        Some(match self {
            JumpMeasure::Zero => unreachable!(),
            JumpMeasure::Atoms { points } => {
                let live: Vec<(f64, f64)> = points.iter().copied().filter(|(_, w)| *w > 0.0).collect();
                JumpSampler::Atoms(DiscreteTable::new(&live))
            }
            JumpMeasure::Exponential { lambda, .. } => JumpSampler::Exponential(*lambda),
            JumpMeasure::TruncatedPower {
                exponent,
                z_min,
                z_max,
                ..
            } => JumpSampler::Power {
                e: 1.0 - exponent,
                z_min: *z_min,
                z_max: *z_max,
            },
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) enum JumpSampler {
    Atoms(DiscreteTable),
    Exponential(f64),
    Power { e: f64, z_min: f64, z_max: f64 },
}

impl JumpSampler {
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpSampler::Atoms(table) => table.sample(rng),
            JumpSampler::Exponential(lambda) => {
                let u: f64 = rng.random();
                -(-u).ln_1p() / lambda
            }
            JumpSampler::Power { e, z_min, z_max } => {
                let u: f64 = rng.random();
                if *e == 0.0 {
                    z_min * (z_max / z_min).powf(u)
                } else {
                    let lo = z_min.powf(*e);
                    let hi = if z_max.is_infinite() { 0.0 } else { z_max.powf(*e) };
                    (lo + u * (hi - lo)).powf(1.0 / e)
                }
            }
        }
    }
}
