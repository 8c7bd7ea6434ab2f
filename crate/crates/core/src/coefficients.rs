//! Closed-form coefficients of the value function and the optimal Gaussian policy.
//!
//! Along the deterministic characteristic `P_t = P0 / (1 + P0 t)` the value
//! function is
//!
//! ```text
//! V(t, x, m) = A(t, m) (x - w)^2 + eta(t) m^2 + zeta(t),   A = exp(alpha(t) m^2 + gamma(t))
//! ```
//!
//! `alpha` and `gamma` have closed forms. `eta` and `zeta` are integrals of
//! closed-form integrands, evaluated by composite Simpson quadrature.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quadrature::{simpson, simpson_pair};

pub const DEFAULT_QUADRATURE_INTERVALS: usize = 1024;

/// Posterior variance `P0 / (1 + P0 t)` of the Sharpe ratio at time `t`.
pub fn posterior_variance(t: f64, p0: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", t, "posterior variance needs t >= 0"));
    }
    if !(p0.is_finite() && p0 >= 0.0) {
        return Err(Error::invalid("prior_var", p0, "must be finite and >= 0"));
    }
    Ok(p0 / (1.0 + p0 * t))
}

#[inline]
pub(crate) fn posterior_variance_unchecked(t: f64, p0: f64) -> f64 {
    p0 / (1.0 + p0 * t)
}

/// The four scalar coefficient functions at one time point, plus `P_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub t: f64,
    pub posterior_var: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub zeta: f64,
}

impl CoefficientSet {
    /// `A = exp(alpha m^2 + gamma)`.
    pub fn curvature(&self, m: f64) -> f64 {
        (self.alpha * m * m + self.gamma).exp()
    }

    /// Entropy premium `D = eta m^2 + zeta`, independent of wealth and target.
    pub fn entropy_premium(&self, m: f64) -> f64 {
        self.eta * m * m + self.zeta
    }

    /// `B = -2 w A`.
    pub fn linear_coefficient(&self, m: f64, w: f64) -> f64 {
        -2.0 * w * self.curvature(m)
    }

    /// `C = w^2 A + D`.
    pub fn constant_coefficient(&self, m: f64, w: f64) -> f64 {
        w * w * self.curvature(m) + self.entropy_premium(m)
    }

    pub fn value(&self, x: f64, m: f64, w: f64) -> f64 {
        let dx = x - w;
        self.curvature(m) * dx * dx + self.entropy_premium(m)
    }
}

/// Mean position and position variance of a Gaussian policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPolicy {
    pub mean_position: f64,
    pub variance: f64,
}

impl GaussianPolicy {
    /// Optimal policy from the coefficients at a state. Shared by the
    /// evaluator and the simulation hot loop.
    #[inline]
    pub(crate) fn optimal(
        alpha: f64,
        gamma: f64,
        p: f64,
        x: f64,
        m: f64,
        params: &ModelParams,
    ) -> Self {
        let sigma = params.sigma;
        let gain = m * (1.0 + 2.0 * p * alpha) / sigma;
        let curvature = (alpha * m * m + gamma).exp();
        Self {
            mean_position: -gain * (x - params.target_w),
            variance: params.tau / (2.0 * sigma * sigma * curvature),
        }
    }

    /// Negative differential entropy `-(1/2) log(2 pi e var)`.
    pub fn neg_entropy(&self) -> f64 {
        -0.5 * (2.0 * PI * std::f64::consts::E * self.variance).ln()
    }
}

/// Evaluator for every closed-form quantity at a fixed parameter set.
///
/// All methods are pure functions of their arguments and the stored
/// configuration.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    params: ModelParams,
    quadrature_intervals: usize,
    deterministic_limit: bool,
    alpha_fault: f64,
}

impl ClosedForm {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            quadrature_intervals: DEFAULT_QUADRATURE_INTERVALS,
            deterministic_limit: false,
            alpha_fault: 0.0,
        })
    }

    pub fn with_quadrature(mut self, intervals: usize) -> Self {
        self.quadrature_intervals = intervals.max(2);
        self
    }

    /// At `tau = 0`, let `value` drop the (undefined) entropy premium and
    /// return `A (x - w)^2` instead of failing.
    pub fn deterministic_limit(mut self, enabled: bool) -> Self {
        self.deterministic_limit = enabled;
        self
    }

    /// Test hook: shifts `alpha` by a constant so the verification layer can
    /// be shown to detect a wrong coefficient.
    pub fn inject_alpha_fault(mut self, offset: f64) -> Self {
        self.alpha_fault = offset;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn quadrature_intervals(&self) -> usize {
        self.quadrature_intervals
    }

    fn premium_suppressed(&self) -> bool {
        self.params.tau == 0.0 && self.deterministic_limit
    }

    pub fn posterior_variance(&self, t: f64) -> Result<f64> {
        let t = self.params.check_time(t)?;
        Ok(posterior_variance_unchecked(t, self.params.prior_var))
    }

    #[inline]
    pub(crate) fn alpha_unchecked(&self, t: f64) -> f64 {
        let p0 = self.params.prior_var;
        let horizon = self.params.horizon;
        -(1.0 + p0 * t) * (horizon - t) / (1.0 + p0 * (2.0 * horizon - t)) + self.alpha_fault
    }

    #[inline]
    pub(crate) fn gamma_unchecked(&self, t: f64) -> f64 {
        // (1+P0 t)(1+P0(2T-t)) / (1+P0 T)^2 = 1 - P0^2 (T-t)^2 / (1+P0 T)^2
        let p0 = self.params.prior_var;
        let horizon = self.params.horizon;
        let r = p0 * (horizon - t) / (1.0 + p0 * horizon);
        0.5 * (-r * r).ln_1p()
    }

    /// Quadratic-in-`m` exponent coefficient of the curvature.
    pub fn alpha(&self, t: f64) -> Result<f64> {
        let t = self.params.check_time(t)?;
        Ok(self.alpha_unchecked(t))
    }

    /// Constant exponent coefficient of the curvature.
    pub fn gamma(&self, t: f64) -> Result<f64> {
        let t = self.params.check_time(t)?;
        Ok(self.gamma_unchecked(t))
    }

    /// `(tau/2) * int_t^T alpha(s) ds`.
    pub fn eta(&self, t: f64) -> Result<f64> {
        let t = self.params.check_time(t)?;
        Ok(self.eta_unchecked(t))
    }

    fn eta_unchecked(&self, t: f64) -> f64 {
        if self.params.tau == 0.0 {
            return 0.0;
        }
        let integral = simpson(
            |s| self.alpha_unchecked(s),
            t,
            self.params.horizon,
            self.quadrature_intervals,
        );
        0.5 * self.params.tau * integral
    }

    /// `-int_t^T ((tau/2)[log(pi tau / sigma^2) - gamma(s)] - P_s^2 eta(s)) ds`.
    pub fn zeta(&self, t: f64) -> Result<f64> {
        let t = self.params.check_time(t)?;
        if self.params.tau == 0.0 {
            return Err(Error::DeterministicLimit);
        }
        Ok(self.zeta_unchecked(t))
    }

    fn zeta_unchecked(&self, t: f64) -> f64 {
        self.entropy_premium_unchecked(t).1
    }

    /// `(eta(t), zeta(t))` from one quadrature pass over shared nodes.
    pub fn entropy_premium(&self, t: f64) -> Result<(f64, f64)> {
        let t = self.params.check_time(t)?;
        if self.params.tau == 0.0 {
            return Err(Error::DeterministicLimit);
        }
        Ok(self.entropy_premium_unchecked(t))
    }

    fn entropy_premium_unchecked(&self, t: f64) -> (f64, f64) {
        let ModelParams {
            sigma,
            tau,
            horizon,
            prior_var: p0,
            ..
        } = self.params;
        let half_tau = 0.5 * tau;
        let log_const = (PI * tau / (sigma * sigma)).ln();
        let log_norm = (p0 * horizon).ln_1p();
        let p_t = posterior_variance_unchecked(t, p0);
        let fault = self.alpha_fault;
        // With a = 1 + P0 s and b = 1 + P0 (2T - s):
        //   alpha = -a (T - s) / b,  gamma = log(a b) / 2 - log(1 + P0 T),
        //   alpha (P_t - P_s) = -(T - s)(P_t a - P0) / b.
        // int_t^T P_s^2 eta(s) ds = (tau/2) int_t^T alpha(r) (P_t - P_r) dr  (swap order, dP = -P^2 dt)
        let integrand = |s: f64| {
            let a = 1.0 + p0 * s;
            let b = 1.0 + p0 * (2.0 * horizon - s);
            let rest = horizon - s;
            let inv_b = 1.0 / b;
            let gamma = 0.5 * (a * b).ln() - log_norm;
            let mut alpha = -a * rest * inv_b;
            let mut drift = rest * (p_t * a - p0) * inv_b;
            if fault != 0.0 {
                alpha += fault;
                drift -= fault * (p_t - p0 / a);
            }
            (alpha, half_tau * (log_const - gamma + drift))
        };
        let (alpha_int, zeta_int) = simpson_pair(integrand, t, horizon, self.quadrature_intervals);
        (half_tau * alpha_int, -zeta_int)
    }

    /// All coefficients at `t`. Fails at `tau = 0` unless the deterministic
    /// limit is enabled, in which case `eta = zeta = 0`.
    pub fn coefficients(&self, t: f64) -> Result<CoefficientSet> {
        let t = self.params.check_time(t)?;
        let (eta, zeta) = if self.params.tau == 0.0 {
            if !self.deterministic_limit {
                return Err(Error::DeterministicLimit);
            }
            (0.0, 0.0)
        } else {
            self.entropy_premium_unchecked(t)
        };
        Ok(CoefficientSet {
            t,
            posterior_var: posterior_variance_unchecked(t, self.params.prior_var),
            alpha: self.alpha_unchecked(t),
            gamma: self.gamma_unchecked(t),
            eta,
            zeta,
        })
    }

    /// Value-function curvature `A(t, m) = exp(alpha(t) m^2 + gamma(t))`.
    pub fn curvature(&self, t: f64, m: f64) -> Result<f64> {
        let t = self.params.check_time(t)?;
        Ok((self.alpha_unchecked(t) * m * m + self.gamma_unchecked(t)).exp())
    }

    pub fn value(&self, t: f64, x: f64, m: f64) -> Result<f64> {
        let t = self.params.check_time(t)?;
        let dx = x - self.params.target_w;
        let a = (self.alpha_unchecked(t) * m * m + self.gamma_unchecked(t)).exp();
        if self.premium_suppressed() {
            return Ok(a * dx * dx);
        }
        if self.params.tau == 0.0 {
            return Err(Error::DeterministicLimit);
        }
        let (eta, zeta) = self.entropy_premium_unchecked(t);
        Ok(a * dx * dx + eta * m * m + zeta)
    }

    pub fn optimal_policy(&self, t: f64, x: f64, m: f64) -> Result<GaussianPolicy> {
        let t = self.params.check_time(t)?;
        let p = posterior_variance_unchecked(t, self.params.prior_var);
        Ok(GaussianPolicy::optimal(
            self.alpha_unchecked(t),
            self.gamma_unchecked(t),
            p,
            x,
            m,
            &self.params,
        ))
    }
}
