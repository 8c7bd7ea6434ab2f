//! Entropy-regularized mean-variance portfolio control when the drift is
//! learned by a Kalman-Bucy filter.
//!
//! - [`coefficients`]: closed-form value function, curvature and optimal
//!   Gaussian policy.
//! - [`filter`]: posterior-mean simulation.
//! - [`montecarlo`]: controlled (belief, wealth) simulation, objective and
//!   martingale estimates, frontier sweeps.
//! - [`verify`]: numerical checks of every closed-form identity.
//! - [`cli`]: command-line runner writing CSV artifacts.

pub mod cli;
pub mod coefficients;
pub mod error;
pub mod filter;
pub mod montecarlo;
pub mod params;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod verify;

pub use coefficients::{posterior_variance, ClosedForm, CoefficientSet, GaussianPolicy};
pub use error::{Error, Result};
pub use params::{BeliefState, ModelParams};
