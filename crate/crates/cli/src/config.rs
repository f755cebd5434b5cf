//! Run configuration file.
//!
//! ```toml
//! [model]
//! g = { family = "linear", c = 0.1 }
//! sigma2 = { family = "linear", c = 1.0 }
//! p = { family = "zero" }
//! r = { family = "affine", c0 = 1.0, c1 = 0.0 }
//! pi = { family = "zero" }
//! kappa = { family = "atom", theta = 0.5 }
//!
//! [sim]            # any SimConfig field; omitted fields take defaults
//! t_max = 30.0
//!
//! [mc]             # estimator inputs, see `McSection`
//! x0 = 1.0
//! n = 10000
//!
//! [grids]          # explicit lists or { from, to, points } log-spaced ranges
//! near_zero = { from = 1e-6, to = 1e-2, points = 9 }
//! large = [1.0, 10.0, 100.0]
//!
//! [output]
//! dir = "out"
//! ```

use std::path::PathBuf;

use csbp_core::model::{build_model, ModelConfig, ModelSpec};
use csbp_core::montecarlo::PathEvent;
use csbp_core::regimes::{ClassifyParams, Grids, DEFAULT_A_SCAN};
use csbp_core::simulate::SimConfig;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelConfig>,
    pub sim: Option<SimConfig>,
    pub mc: Option<McSection>,
    pub grids: Option<GridSection>,
    pub output: Option<OutputSection>,
    pub criteria: Option<CriteriaSection>,
    pub regimes: Option<RegimesSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub x0: Option<f64>,
    pub n: Option<u64>,
    /// `estimate`: e.g. `[{ kind = "absorbed-by", t = 10.0 }]`.
    pub events: Option<Vec<PathEvent>>,
    /// `decay`: survival curve times.
    pub times: Option<Vec<f64>>,
    /// `decay`: GSG constants used for the rate bound.
    pub eta: Option<f64>,
    pub r_lower: Option<f64>,
    /// `decay`: slack added to the bound exponent in the comparison.
    pub tolerance: Option<f64>,
    /// `martingale`
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub b: Option<f64>,
    pub checkpoints: Option<Vec<f64>>,
    pub budget: Option<f64>,
    /// `simulate`
    pub path_index: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    LogRange { from: f64, to: f64, points: usize },
}

impl GridSpec {
    pub fn points(&self, key: &str) -> Result<Vec<f64>, CliError> {
        match self {
            GridSpec::List(v) => Ok(v.clone()),
            &GridSpec::LogRange { from, to, points } => {
                if !(from > 0.0 && to > from && points >= 2) {
                    return Err(CliError::Config(format!(
                        "{key}: log range needs 0 < from < to and points >= 2"
                    )));
                }
                let (a, b) = (from.ln(), to.ln());
                Ok((0..points)
                    .map(|i| {
                        if i + 1 == points {
                            to
                        } else {
                            (a + (b - a) * i as f64 / (points - 1) as f64).exp()
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub near_zero: GridSpec,
    pub large: GridSpec,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub decimation: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaSection {
    pub a: Option<Vec<f64>>,
    pub include_h: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimesSection {
    pub a_values: Option<Vec<f64>>,
    pub eta_noise: Option<f64>,
    pub eta_local: Option<f64>,
    pub eta_global: Option<f64>,
    pub r_lower: Option<f64>,
    pub slack: Option<f64>,
}

impl RegimesSection {
    pub fn classify_params(&self) -> ClassifyParams {
        let d = ClassifyParams::default();
        ClassifyParams {
            a_values: self.a_values.clone().unwrap_or(d.a_values),
            eta_noise: self.eta_noise.unwrap_or(d.eta_noise),
            eta_local: self.eta_local.unwrap_or(d.eta_local),
            eta_global: self.eta_global.unwrap_or(d.eta_global),
            r_lower: self.r_lower.or(d.r_lower),
            slack: self.slack.unwrap_or(d.slack),
        }
    }
}

fn missing(section: &str, command: &str) -> CliError {
    CliError::Config(format!("missing section [{section}] required by `{command}`"))
}

pub fn require<T: Copy>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("missing key {key}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn model(&self, command: &str) -> Result<ModelSpec, CliError> {
        let c = self.model.clone().ok_or_else(|| missing("model", command))?;
        build_model(c).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn sim(&self, command: &str, seed: Option<u64>) -> Result<SimConfig, CliError> {
        let mut s = self.sim.ok_or_else(|| missing("sim", command))?;
        if let Some(seed) = seed {
            s.seed = seed;
        }
        s.decimation = self.output.as_ref().and_then(|o| o.decimation).unwrap_or(1);
        s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(s)
    }

    pub fn mc(&self, command: &str) -> Result<&McSection, CliError> {
        self.mc.as_ref().ok_or_else(|| missing("mc", command))
    }

    pub fn grids(&self, command: &str) -> Result<Grids, CliError> {
        let g = self.grids.as_ref().ok_or_else(|| missing("grids", command))?;
        Ok(Grids {
            near_zero: g.near_zero.points("grids.near_zero")?,
            large: g.large.points("grids.large")?,
        })
    }

    pub fn classify_params(&self) -> ClassifyParams {
        self.regimes.clone().unwrap_or_default().classify_params()
    }

    pub fn criteria_a(&self) -> Vec<f64> {
        self.criteria
            .as_ref()
            .and_then(|c| c.a.clone())
            .unwrap_or_else(|| DEFAULT_A_SCAN.to_vec())
    }

    pub fn include_h(&self) -> bool {
        self.criteria.as_ref().and_then(|c| c.include_h).unwrap_or(true)
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output.as_ref().and_then(|o| o.dir.clone())
    }
}
