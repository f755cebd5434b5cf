use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{invalid, Error, Result};

/// Law of the surviving fraction `Θ ∈ (0, 1]` at a catastrophe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FragmentationKernel {
    Atom { theta: f64 },
    /// `(θ_i, w_i)` pairs; weights sum to one.
    Discrete { atoms: Vec<(f64, f64)> },
    Uniform,
    Beta { alpha: f64, beta: f64 },
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

impl FragmentationKernel {
    pub fn validate(&self, key: &str) -> Result<()> {
        let in_unit = |name: String, t: f64| {
            if t > 0.0 && t <= 1.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("atom {t} outside (0, 1]")))
            }
        };
        match self {
            FragmentationKernel::Atom { theta } => in_unit(format!("{key}.theta"), *theta),
            FragmentationKernel::Discrete { atoms } => {
                if atoms.is_empty() {
                    return Err(invalid(format!("{key}.atoms"), "at least one atom required"));
                }
                for (i, (t, w)) in atoms.iter().enumerate() {
                    in_unit(format!("{key}.atoms[{i}]"), *t)?;
                    if !(w.is_finite() && *w >= 0.0) {
                        return Err(invalid(format!("{key}.atoms[{i}]"), "weight must be finite and >= 0"));
                    }
                }
                let total: f64 = atoms.iter().map(|(_, w)| w).sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(invalid(format!("{key}.atoms"), format!("weights sum to {total}, not 1")));
                }
                Ok(())
            }
            FragmentationKernel::Uniform => Ok(()),
            FragmentationKernel::Beta { alpha, beta } => {
                for (name, v) in [("alpha", alpha), ("beta", beta)] {
                    if !(v.is_finite() && *v > 0.0) {
                        return Err(invalid(format!("{key}.{name}"), "must be finite and > 0"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Whether `Θ ≡ 1`, in which case catastrophes do nothing.
    pub fn is_identity(&self) -> bool {
        match self {
            FragmentationKernel::Atom { theta } => *theta == 1.0,
            FragmentationKernel::Discrete { atoms } => atoms.iter().all(|(t, w)| *t == 1.0 || *w == 0.0),
            _ => false,
        }
    }

    /// `𝔼[Θ^u]`.
    pub fn moment(&self, u: f64) -> Result<f64> {
        match self {
            FragmentationKernel::Atom { theta } => Ok(theta.powf(u)),
            FragmentationKernel::Discrete { atoms } => Ok(atoms.iter().map(|(t, w)| w * t.powf(u)).sum()),
            FragmentationKernel::Uniform => {
                if u > -1.0 {
                    Ok(1.0 / (u + 1.0))
                } else {
                    Err(Error::InfiniteMoment(format!("E[Θ^{u}] for uniform Θ requires u > -1")))
                }
            }
            FragmentationKernel::Beta { alpha, beta } => {
                if alpha + u > 0.0 {
                    Ok((ln_beta(alpha + u, *beta) - ln_beta(*alpha, *beta)).exp())
                } else {
                    Err(Error::InfiniteMoment(format!(
                        "E[Θ^{u}] for Beta({alpha}, {beta}) requires alpha + u > 0"
                    )))
                }
            }
        }
    }

    /// `1 - 𝔼[Θ^u]`, without cancellation when `u` is close to zero.
    pub fn one_minus_moment(&self, u: f64) -> Result<f64> {
        match self {
            FragmentationKernel::Atom { theta } => Ok(-(u * theta.ln()).exp_m1()),
            FragmentationKernel::Discrete { atoms } => {
                Ok(-atoms.iter().map(|(t, w)| w * (u * t.ln()).exp_m1()).sum::<f64>())
            }
            FragmentationKernel::Uniform => {
                self.moment(u)?;
                Ok(u / (u + 1.0))
            }
            FragmentationKernel::Beta { alpha, beta } => {
                self.moment(u)?;
                Ok(-(ln_beta(alpha + u, *beta) - ln_beta(*alpha, *beta)).exp_m1())
            }
        }
    }

    /// `𝔼[Θ^τ ln Θ]` for `τ >= 0`.
    pub fn log_moment(&self, tau: f64) -> Result<f64> {
        if !(tau >= 0.0) {
            return Err(crate::error::domain("kernel_log_moment", format!("tau = {tau} must be >= 0")));
        }
        Ok(match self {
            FragmentationKernel::Atom { theta } => theta.powf(tau) * theta.ln(),
            FragmentationKernel::Discrete { atoms } => atoms.iter().map(|(t, w)| w * t.powf(tau) * t.ln()).sum(),
            FragmentationKernel::Uniform => -1.0 / ((tau + 1.0) * (tau + 1.0)),
            FragmentationKernel::Beta { alpha, beta } => {
                let ratio = (ln_beta(alpha + tau, *beta) - ln_beta(*alpha, *beta)).exp();
                ratio * (digamma(alpha + tau) - digamma(alpha + beta + tau))
            }
        })
    }

    /// Smallest atom, or `None` for kernels with a density.
    pub fn min_atom(&self) -> Option<f64> {
        match self {
            FragmentationKernel::Atom { theta } => Some(*theta),
            FragmentationKernel::Discrete { atoms } => atoms
                .iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|(t, _)| *t)
                .reduce(f64::min),
            _ => None,
        }
    }

    pub(crate) fn sampler(&self) -> KernelSampler {
        match self {
            FragmentationKernel::Atom { theta } => KernelSampler::Atom(*theta),
            FragmentationKernel::Discrete { atoms } => KernelSampler::Discrete(DiscreteTable::new(atoms)),
            FragmentationKernel::Uniform => KernelSampler::Uniform,
            FragmentationKernel::Beta { alpha, beta } => {
                KernelSampler::Beta(Beta::new(*alpha, *beta).expect("validated beta parameters"))
            }
        }
    }
}

/// Cumulative table for sampling from finitely many weighted values.
#[derive(Debug, Clone)]
pub(crate) struct DiscreteTable {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteTable {
    pub(crate) fn new(points: &[(f64, f64)]) -> Self {
        let total: f64 = points.iter().map(|(_, w)| w).sum();
        let mut acc = 0.0;
        let mut values = Vec::with_capacity(points.len());
        let mut cumulative = Vec::with_capacity(points.len());
        for (v, w) in points {
            acc += w / total;
            values.push(*v);
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self { values, cumulative }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.values.len() - 1);
        self.values[i]
    }
}

#[derive(Debug, Clone)]
pub(crate) enum KernelSampler {
    Atom(f64),
    Discrete(DiscreteTable),
    Uniform,
    Beta(Beta<f64>),
}

impl KernelSampler {
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            KernelSampler::Atom(t) => *t,
            KernelSampler::Discrete(table) => table.sample(rng),
            KernelSampler::Uniform => 1.0 - rng.random::<f64>(),
            KernelSampler::Beta(b) => b.sample(rng).max(f64::MIN_POSITIVE),
        }
    }
}
