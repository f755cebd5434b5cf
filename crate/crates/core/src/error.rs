use thiserror::Error;

/// Errors raised by model construction, criterion evaluation, simulation
/// and the Monte Carlo estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A family parameter is outside its admissible range.
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    /// A moment or functional diverges for the given family.
    #[error("infinite moment: {0}")]
    InfiniteMoment(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature failed to converge after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    Quadrature {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    /// Root bracketing failed.
    #[error("no root: {0}")]
    NoRoot(String),

    /// The simulated state became NaN or infinite below the explosion threshold.
    #[error("non-finite state on path {path_index} at t = {time}")]
    NonFiniteState { path_index: u64, time: f64 },

    /// Not enough time points with usable survival estimates for a decay fit.
    #[error("too few survivors: {usable} usable time points, at least 4 required")]
    TooFewSurvivors { usable: usize },

    /// No path survived to the snapshot time.
    #[error("all {n} paths were absorbed or exploded before t = {time}")]
    AllAbsorbed { n: u64, time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        key: key.into(),
        reason: reason.into(),
    }
}

pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain {
        op,
        reason: reason.into(),
    }
}
