//! Model constants and the filtered belief state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market, prior and objective constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Asset volatility per square-root time unit.
    pub sigma: f64,
    /// Investment horizon.
    pub horizon: f64,
    /// Entropy weight. Zero selects the deterministic limit.
    pub tau: f64,
    /// Target wealth level (discounted).
    pub target_w: f64,
    /// Prior mean of the Sharpe ratio.
    pub prior_mean: f64,
    /// Prior variance of the Sharpe ratio.
    pub prior_var: f64,
}

impl Default for ModelParams {
    /// The parameter set used for the sample-path and heatmap figures.
    fn default() -> Self {
        Self {
            sigma: 0.2,
            horizon: 1.0,
            tau: 1.0,
            target_w: 1.0,
            prior_mean: 0.0,
            prior_var: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid("sigma", self.sigma, "must be finite and > 0"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon", self.horizon, "must be finite and > 0"));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::invalid("tau", self.tau, "must be finite and >= 0"));
        }
        if !(self.prior_var.is_finite() && self.prior_var >= 0.0) {
            return Err(Error::invalid("prior_var", self.prior_var, "must be finite and >= 0"));
        }
        if !self.target_w.is_finite() {
            return Err(Error::invalid("target_w", self.target_w, "must be finite"));
        }
        if !self.prior_mean.is_finite() {
            return Err(Error::invalid("prior_mean", self.prior_mean, "must be finite"));
        }
        Ok(())
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_target(mut self, w: f64) -> Self {
        self.target_w = w;
        self
    }

    pub fn with_prior_var(mut self, p0: f64) -> Self {
        self.prior_var = p0;
        self
    }

    pub fn with_prior_mean(mut self, m0: f64) -> Self {
        self.prior_mean = m0;
        self
    }

    /// Maps `t` into `[0, T]`, absorbing endpoint drift up to `1e-12`.
    pub fn check_time(&self, t: f64) -> Result<f64> {
        const SLACK: f64 = 1e-12;
        if !t.is_finite() || t < -SLACK || t > self.horizon + SLACK {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(t.clamp(0.0, self.horizon))
    }
}

/// Posterior moments of the Sharpe ratio at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefState {
    pub t: f64,
    pub m: f64,
    pub p: f64,
}

impl BeliefState {
    /// A state on the model characteristic: `p` is the closed-form posterior
    /// variance at `t`.
    pub fn on_characteristic(params: &ModelParams, t: f64, m: f64) -> Result<Self> {
        let t = params.check_time(t)?;
        let p = crate::coefficients::posterior_variance(t, params.prior_var)?;
        Ok(Self { t, m, p })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_params() {
        let base = ModelParams::default();
        assert!(base.validate().is_ok());
        assert!(ModelParams { sigma: 0.0, ..base }.validate().is_err());
        assert!(ModelParams { horizon: -1.0, ..base }.validate().is_err());
        assert!(ModelParams { tau: -0.1, ..base }.validate().is_err());
        assert!(ModelParams { prior_var: -1e-3, ..base }.validate().is_err());
        assert!(ModelParams { target_w: f64::NAN, ..base }.validate().is_err());
        assert!(base.with_tau(0.0).validate().is_ok());
    }

    #[test]
    fn time_clamps_only_within_slack() {
        let p = ModelParams::default();
        assert_eq!(p.check_time(1.0 + 1e-13).unwrap(), 1.0);
        assert_eq!(p.check_time(-5e-13).unwrap(), 0.0);
        assert!(p.check_time(1.0 + 1e-9).is_err());
        assert!(p.check_time(-1e-9).is_err());
    }

    #[test]
    fn characteristic_state_carries_closed_form_variance() {
        let s = BeliefState::on_characteristic(&ModelParams::default(), 1.0, 0.3).unwrap();
        assert_eq!(s.p, 0.5);
    }
}
