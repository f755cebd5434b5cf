//! Simulation and numerical analysis of continuous-state nonlinear branching
//! processes with catastrophes.
//!
//! The process solves
//!
//! ```text
//! dX = g(X) dt + sqrt(2 σ²(X)) dB + positive jumps at rate p(X) π(dz) (compensated)
//!      + catastrophes X → Θ X at rate r(X), Θ ~ κ on (0, 1]
//! ```
//!
//! * [`model`] defines and validates a process instance.
//! * [`criteria`] evaluates the criterion functions `G_a`, `H`, `I_a`, `I`.
//! * [`regimes`] checks the absorption, explosion and growth conditions on grids.
//! * [`simulate`] generates paths.
//! * [`montecarlo`] runs parallel, reproducible ensemble estimators.

pub mod criteria;
mod error;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod regimes;
pub mod simulate;

pub use error::{Error, Result};
