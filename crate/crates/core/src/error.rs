use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("deterministic limit has no entropy premium (tau = 0); enable the deterministic-limit flag to drop it")]
    DeterministicLimit,

    #[error("n_steps = {n_steps} is too coarse to resolve the dynamics; use at least {min}")]
    InsufficientSteps { n_steps: usize, min: usize },

    #[error("non-positive wealth curvature V_xx = {v_xx} at (t={t}, x={x}, m={m})")]
    NonPositiveCurvature { t: f64, x: f64, m: f64, v_xx: f64 },

    #[error("{0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}
