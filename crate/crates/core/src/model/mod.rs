//! Process definition: coefficient families, the catastrophe kernel, the
//! positive-jump measure, and the validated [`ModelSpec`].

mod coefficient;
mod jump;
mod kernel;
mod validate;

pub use coefficient::CoefficientFn;
pub use jump::{JumpFunctionals, JumpMeasure};
pub use kernel::FragmentationKernel;
pub use validate::{validate_assumptions, ClauseResult, ClauseStatus, ValidationReport};

pub(crate) use jump::JumpSampler;
pub(crate) use kernel::KernelSampler;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};

/// Unvalidated parameter set, one entry per coefficient. This is also the
/// canonical serialized form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub g: CoefficientFn,
    pub sigma2: CoefficientFn,
    pub p: CoefficientFn,
    pub r: CoefficientFn,
    pub pi: JumpMeasure,
    pub kappa: FragmentationKernel,
}

impl ModelConfig {
    /// All coefficients zero, `π = 0`, `Θ ≡ 1`.
    pub fn zero() -> Self {
        Self {
            g: CoefficientFn::Zero,
            sigma2: CoefficientFn::Zero,
            p: CoefficientFn::Zero,
            r: CoefficientFn::Zero,
            pi: JumpMeasure::Zero,
            kappa: FragmentationKernel::Atom { theta: 1.0 },
        }
    }
}

/// A validated process instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    config: ModelConfig,
    jumps: JumpFunctionals,
}

/// Build a [`ModelSpec`] from a parameter set.
///
/// Family parameters are stored exactly as given. Only intrinsic family
/// constraints are enforced here (kernel atoms in `(0, 1]`, non-negative
/// masses, ordered tables); the structural assumptions on the coefficients
/// are reported by [`validate_assumptions`] instead.
pub fn build_model(config: ModelConfig) -> Result<ModelSpec> {
    config.g.validate("model.g")?;
    config.sigma2.validate("model.sigma2")?;
    config.p.validate("model.p")?;
    config.r.validate("model.r")?;
    config.pi.validate("model.pi")?;
    config.kappa.validate("model.kappa")?;
    let jumps = config.pi.functionals()?;
    if !jumps.m0.is_finite() {
        return Err(invalid("model.pi", "total mass must be finite"));
    }
    Ok(ModelSpec { config, jumps })
}

impl ModelSpec {
    pub fn zero() -> Self {
        build_model(ModelConfig::zero()).expect("zero model is valid")
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn g(&self) -> &CoefficientFn {
        &self.config.g
    }

    pub fn sigma2(&self) -> &CoefficientFn {
        &self.config.sigma2
    }

    pub fn p(&self) -> &CoefficientFn {
        &self.config.p
    }

    pub fn r(&self) -> &CoefficientFn {
        &self.config.r
    }

    pub fn pi(&self) -> &JumpMeasure {
        &self.config.pi
    }

    pub fn kappa(&self) -> &FragmentationKernel {
        &self.config.kappa
    }

    pub fn jump_functionals(&self) -> &JumpFunctionals {
        &self.jumps
    }

    /// Canonical TOML text of the parameter set.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.config).expect("model config serializes")
    }

    pub fn from_toml(text: &str) -> std::result::Result<ModelSpec, ModelParseError> {
        let config: ModelConfig = toml::from_str(text).map_err(|e| ModelParseError::Syntax(e.to_string()))?;
        build_model(config).map_err(ModelParseError::Invalid)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex_digest(self.to_toml().as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelParseError {
    #[error("{0}")]
    Syntax(String),
    #[error(transparent)]
    Invalid(crate::Error),
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
