//! Numerical checks of the closed-form solution.
//!
//! Every check differentiates or optimizes numerically (finite differences,
//! damped Newton, quadrature) so that it stays independent of the algebra
//! that produced the closed forms.

use std::f64::consts::{E, PI};

use rayon::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coefficients::{ClosedForm, CoefficientSet, GaussianPolicy};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quadrature::simpson;

pub const ODE_TOLERANCE: f64 = 1e-6;
pub const PDE_TOLERANCE: f64 = 1e-4;
pub const FOC_TOLERANCE: f64 = 1e-4;
pub const LIMIT_TOLERANCE: f64 = 1e-4;
pub const DETERMINISTIC_TOLERANCE: f64 = 1e-10;
pub const CONVICTION_TOLERANCE: f64 = 1e-4;

/// Outcome of one identity check. `passed` is `max_abs_residual < tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub name: String,
    pub grid_size: usize,
    pub max_abs_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl ResidualReport {
    pub fn new(name: impl Into<String>, grid_size: usize, max_abs_residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            grid_size,
            max_abs_residual,
            tolerance,
            // NaN never passes
            passed: max_abs_residual < tolerance,
        }
    }
}

/// Finite-difference stencil for first derivatives in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    ThreePoint,
    FivePoint,
}

impl Stencil {
    fn derivative<F: Fn(f64) -> f64>(self, f: F, t: f64, h: f64) -> f64 {
        match self {
            Stencil::ThreePoint => (f(t + h) - f(t - h)) / (2.0 * h),
            Stencil::FivePoint => {
                (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h)
            }
        }
    }

    fn derivative_pair<F: Fn(f64) -> (f64, f64)>(self, f: F, t: f64, h: f64) -> (f64, f64) {
        let combine = |terms: &[(f64, (f64, f64))], scale: f64| {
            let (mut u, mut v) = (0.0, 0.0);
            for &(w, (fu, fv)) in terms {
                u += w * fu;
                v += w * fv;
            }
            (u / scale, v / scale)
        };
        match self {
            Stencil::ThreePoint => combine(&[(-1.0, f(t - h)), (1.0, f(t + h))], 2.0 * h),
            Stencil::FivePoint => combine(
                &[
                    (1.0, f(t - 2.0 * h)),
                    (-8.0, f(t - h)),
                    (8.0, f(t + h)),
                    (-1.0, f(t + 2.0 * h)),
                ],
                12.0 * h,
            ),
        }
    }

    fn reach(self) -> f64 {
        match self {
            Stencil::ThreePoint => 1.0,
            Stencil::FivePoint => 2.0,
        }
    }
}

/// Max that lets NaN through, so a NaN residual fails its report.
fn worst(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// `n` evenly spaced points on `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// `n` points on `[-half_width, half_width]` with `grid[n-1-i] == -grid[i]`
/// bit for bit. `n` is rounded up to odd so that 0 is included.
pub fn symmetric_grid(half_width: f64, n: usize) -> Vec<f64> {
    let n = n.max(1) | 1;
    let half = (n / 2) as i64;
    if half == 0 {
        return vec![0.0];
    }
    (-half..=half)
        .map(|k| half_width * k as f64 / half as f64)
        .collect()
}

// ---------------------------------------------------------------------------
// ODE residuals
// ---------------------------------------------------------------------------

/// Residuals of the four coefficient ODEs on the interior of an `n_grid`
/// time grid:
///
/// ```text
/// alpha' = 1 + 4 P alpha + 2 P^2 alpha^2      gamma' = -P^2 alpha
/// eta'   = -(tau/2) alpha                     zeta'  = (tau/2)[log(pi tau / sigma^2) - gamma] - P^2 eta
/// ```
///
/// The `eta`/`zeta` reports are omitted at `tau = 0`.
pub fn riccati_residuals(
    model: &ClosedForm,
    n_grid: usize,
    h: f64,
    stencil: Stencil,
) -> Result<Vec<ResidualReport>> {
    if n_grid < 10 {
        return Err(Error::invalid("n_grid", n_grid as f64, "must be >= 10"));
    }
    let params = *model.params();
    let horizon = params.horizon;
    let reach = stencil.reach() * h;
    let grid: Vec<f64> = linspace(0.0, horizon, n_grid)
        .into_iter()
        .filter(|&t| t - reach >= 0.0 && t + reach <= horizon)
        .collect();

    let p_at = |t: f64| model.posterior_variance(t).expect("grid inside horizon");
    let alpha = |t: f64| model.alpha(t).expect("grid inside horizon");
    let gamma = |t: f64| model.gamma(t).expect("grid inside horizon");

    let (max_alpha, max_gamma) = grid
        .par_iter()
        .map(|&t| {
            let p = p_at(t);
            let a = alpha(t);
            let da = stencil.derivative(alpha, t, h);
            let dg = stencil.derivative(gamma, t, h);
            (
                (da - (1.0 + 4.0 * p * a + 2.0 * p * p * a * a)).abs(),
                (dg + p * p * a).abs(),
            )
        })
        .reduce(|| (0.0, 0.0), |x, y| (worst(x.0, y.0), worst(x.1, y.1)));
    let mut reports = vec![
        ResidualReport::new("riccati_alpha", grid.len(), max_alpha, ODE_TOLERANCE),
        ResidualReport::new("riccati_gamma", grid.len(), max_gamma, ODE_TOLERANCE),
    ];

    if params.tau > 0.0 {
        let tau = params.tau;
        let log_const = (PI * tau / (params.sigma * params.sigma)).ln();
        let premium = |t: f64| model.entropy_premium(t).expect("grid inside horizon");
        let (max_eta, max_zeta) = grid
            .par_iter()
            .map(|&t| {
                let p = p_at(t);
                let (de, dz) = stencil.derivative_pair(premium, t, h);
                let eta = model.eta(t).expect("grid inside horizon");
                let rhs = 0.5 * tau * (log_const - gamma(t)) - p * p * eta;
                ((de + 0.5 * tau * alpha(t)).abs(), (dz - rhs).abs())
            })
            .reduce(|| (0.0, 0.0), |x, y| (worst(x.0, y.0), worst(x.1, y.1)));
        reports.push(ResidualReport::new("entropy_eta", grid.len(), max_eta, ODE_TOLERANCE));
        reports.push(ResidualReport::new("entropy_zeta", grid.len(), max_zeta, ODE_TOLERANCE));
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
// HJB residual
// ---------------------------------------------------------------------------

/// Grids for the on-characteristic HJB residual.
#[derive(Debug, Clone, PartialEq)]
pub struct HjbGrid {
    pub t: Vec<f64>,
    pub m: Vec<f64>,
    pub x: Vec<f64>,
}

impl HjbGrid {
    /// `t` over `[0.1 T, 0.9 T]`, `m` over `[-2, 2]`, `x` over `w +- 2`.
    pub fn default_for(params: &ModelParams) -> Self {
        let horizon = params.horizon;
        let w = params.target_w;
        Self {
            t: linspace(0.1 * horizon, 0.9 * horizon, 9),
            m: linspace(-2.0, 2.0, 9),
            x: linspace(w - 2.0, w + 2.0, 9),
        }
    }

    pub fn size(&self) -> usize {
        self.t.len() * self.m.len() * self.x.len()
    }
}

/// The explicit entropy term `(tau/2) log(2 pi tau / (sigma^2 V_xx))` of the
/// reduced HJB.
pub fn hjb_log_term(params: &ModelParams, v_xx: f64) -> f64 {
    let tau = params.tau;
    if tau == 0.0 {
        return 0.0;
    }
    0.5 * tau * (2.0 * PI * tau / (params.sigma * params.sigma * v_xx)).ln()
}

/// Max over the grid of
///
/// ```text
/// | V_t + (P^2/2) V_mm - (m V_x + P V_xm)^2 / (2 V_xx) - (tau/2) log(2 pi tau / (sigma^2 V_xx)) |
/// ```
///
/// with `V = value(t, x, m)` along the characteristic and every derivative
/// a central difference with step `h`.
pub fn hjb_residual(model: &ClosedForm, grid: &HjbGrid, h: f64) -> Result<ResidualReport> {
    let model = model.clone().deterministic_limit(true);
    let params = *model.params();
    if !(h > 0.0) {
        return Err(Error::invalid("h", h, "must be > 0"));
    }
    let w = params.target_w;
    let mut max_res = 0.0f64;
    for &t in &grid.t {
        if t - h < 0.0 || t + h > params.horizon {
            return Err(Error::invalid("t", t, "t +- h must lie inside [0, T]"));
        }
        let now = model.coefficients(t)?;
        let before = model.coefficients(t - h)?;
        let after = model.coefficients(t + h)?;
        let p = now.posterior_var;
        let v = |c: &CoefficientSet, x: f64, m: f64| c.value(x, m, w);
        for &m in &grid.m {
            for &x in &grid.x {
                let centre = v(&now, x, m);
                let v_t = (v(&after, x, m) - v(&before, x, m)) / (2.0 * h);
                let v_x = (v(&now, x + h, m) - v(&now, x - h, m)) / (2.0 * h);
                let v_xx = (v(&now, x + h, m) - 2.0 * centre + v(&now, x - h, m)) / (h * h);
                let v_mm = (v(&now, x, m + h) - 2.0 * centre + v(&now, x, m - h)) / (h * h);
                let v_xm = (v(&now, x + h, m + h) - v(&now, x + h, m - h) - v(&now, x - h, m + h)
                    + v(&now, x - h, m - h))
                    / (4.0 * h * h);
                if !(v_xx > 0.0) {
                    return Err(Error::NonPositiveCurvature { t, x, m, v_xx });
                }
                let g = m * v_x + p * v_xm;
                let res = v_t + 0.5 * p * p * v_mm - g * g / (2.0 * v_xx) - hjb_log_term(&params, v_xx);
                max_res = max_res.max(res.abs());
            }
        }
    }
    Ok(ResidualReport::new(
        format!("hjb_residual_h{h:e}"),
        grid.size(),
        max_res,
        PDE_TOLERANCE,
    ))
}

/// HJB residuals at each step size plus the least-squares log-log slope of
/// max residual against `h`.
pub fn hjb_convergence(model: &ClosedForm, grid: &HjbGrid, steps: &[f64]) -> Result<(Vec<ResidualReport>, f64)> {
    let reports = steps
        .iter()
        .map(|&h| hjb_residual(model, grid, h))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.max_abs_residual.ln()).collect();
    Ok((reports, loglog_slope(&xs, &ys)))
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

// ---------------------------------------------------------------------------
// Gaussian first-order condition
// ---------------------------------------------------------------------------

/// A `(t, x, m)` point of the state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub t: f64,
    pub x: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocOutcome {
    pub state: State,
    pub numerical: GaussianPolicy,
    pub closed_form: GaussianPolicy,
    pub phi_numerical: f64,
    pub phi_closed_form: f64,
    /// `H(mixture) - H(gaussian)` at equal first two moments; positive means
    /// the Gaussian has the lower policy-dependent cost.
    pub mixture_gap: f64,
    pub converged: bool,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocCheck {
    /// Max relative error of the recovered `(mean, variance)`; a state that
    /// fails to converge makes this infinite.
    pub report: ResidualReport,
    /// Counts states where the equal-moment mixture did not raise the cost;
    /// passes only at zero.
    pub mixture_report: ResidualReport,
    pub outcomes: Vec<FocOutcome>,
}

/// Value-function derivatives entering the policy optimization.
#[derive(Debug, Clone, Copy)]
struct LocalDerivatives {
    v_x: f64,
    v_xx: f64,
    v_xm: f64,
}

fn local_derivatives(coeffs: &CoefficientSet, w: f64, x: f64, m: f64) -> LocalDerivatives {
    let h = 1e-3;
    let v = |x: f64, m: f64| coeffs.value(x, m, w);
    LocalDerivatives {
        v_x: (v(x + h, m) - v(x - h, m)) / (2.0 * h),
        v_xx: (v(x + h, m) - 2.0 * v(x, m) + v(x - h, m)) / (h * h),
        v_xm: (v(x + h, m + h) - v(x + h, m - h) - v(x - h, m + h) + v(x - h, m - h)) / (4.0 * h * h),
    }
}

/// Policy-dependent part of the generator plus entropy cost, for a Gaussian
/// with mean `u` and variance `exp(log_var)`.
fn phi(params: &ModelParams, d: &LocalDerivatives, p: f64, m: f64, u: f64, log_var: f64) -> f64 {
    let sigma = params.sigma;
    let g = m * d.v_x + p * d.v_xm;
    let neg_entropy = -0.5 * ((2.0 * PI * E).ln() + log_var);
    sigma * u * g + 0.5 * sigma * sigma * (u * u + log_var.exp()) * d.v_xx + params.tau * neg_entropy
}

/// Damped Newton with central-difference gradient and Hessian.
fn minimize_2d<F: Fn(f64, f64) -> f64>(f: F, start: (f64, f64)) -> ((f64, f64), bool) {
    let (mut a, mut b) = start;
    for _ in 0..200 {
        let ha = 1e-4 * (1.0 + a.abs());
        let hb = 1e-4 * (1.0 + b.abs());
        let f0 = f(a, b);
        let fa_p = f(a + ha, b);
        let fa_m = f(a - ha, b);
        let fb_p = f(a, b + hb);
        let fb_m = f(a, b - hb);
        let ga = (fa_p - fa_m) / (2.0 * ha);
        let gb = (fb_p - fb_m) / (2.0 * hb);
        let haa = (fa_p - 2.0 * f0 + fa_m) / (ha * ha);
        let hbb = (fb_p - 2.0 * f0 + fb_m) / (hb * hb);
        let hab = (f(a + ha, b + hb) - f(a + ha, b - hb) - f(a - ha, b + hb) + f(a - ha, b - hb))
            / (4.0 * ha * hb);
        let det = haa * hbb - hab * hab;
        let (mut da, mut db) = if haa > 0.0 && det > 0.0 {
            ((-hbb * ga + hab * gb) / det, (hab * ga - haa * gb) / det)
        } else {
            (-ga, -gb)
        };
        // backtrack until the step decreases f
        let mut accepted = false;
        for _ in 0..60 {
            if f(a + da, b + db) <= f0 {
                accepted = true;
                break;
            }
            da *= 0.5;
            db *= 0.5;
        }
        if !accepted {
            return ((a, b), true);
        }
        a += da;
        b += db;
        if da.abs() <= 1e-8 * (1.0 + a.abs()) && db.abs() <= 1e-8 * (1.0 + b.abs()) {
            return ((a, b), true);
        }
    }
    ((a, b), false)
}

/// Negative differential entropy of a density by Simpson quadrature.
fn neg_entropy_quadrature<F: Fn(f64) -> f64>(density: F, lo: f64, hi: f64, n: usize) -> f64 {
    simpson(
        |u| {
            let d = density(u);
            if d > 0.0 {
                d * d.ln()
            } else {
                0.0
            }
        },
        lo,
        hi,
        n,
    )
}

fn normal_pdf(u: f64, mean: f64, var: f64) -> f64 {
    (-(u - mean) * (u - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Numerically minimizes the policy-dependent cost over Gaussians at each
/// state and compares the minimizer with the closed-form optimal policy.
/// Also checks that an equal-moment two-component mixture has higher cost.
pub fn gaussian_foc_check(model: &ClosedForm, states: &[State], n_quadrature: usize) -> Result<FocCheck> {
    let params = *model.params();
    if params.tau <= 0.0 {
        return Err(Error::DeterministicLimit);
    }
    let model = model.clone();
    let mut outcomes = Vec::with_capacity(states.len());
    for &s in states {
        if s.t >= params.horizon {
            return Err(Error::invalid("t", s.t, "first-order check needs t < T"));
        }
        let coeffs = model.coefficients(s.t)?;
        let d = local_derivatives(&coeffs, params.target_w, s.x, s.m);
        let p = coeffs.posterior_var;
        let objective = |u: f64, lv: f64| phi(&params, &d, p, s.m, u, lv);
        let ((u, lv), converged) = minimize_2d(objective, (0.0, 0.0));
        let numerical = GaussianPolicy {
            mean_position: u,
            variance: lv.exp(),
        };
        let closed_form = model.optimal_policy(s.t, s.x, s.m)?;
        let phi_numerical = objective(u, lv);
        let phi_closed_form = objective(closed_form.mean_position, closed_form.variance.ln());

        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        let relative_error = if converged {
            rel(numerical.mean_position, closed_form.mean_position)
                .max(rel(numerical.variance, closed_form.variance))
        } else {
            f64::INFINITY
        };

        // Equal-moment mixture 0.5 N(u - d, v - d^2) + 0.5 N(u + d, v - d^2).
        let mean = closed_form.mean_position;
        let var = closed_form.variance;
        let sd = var.sqrt();
        let shift = 0.5 * sd;
        let comp_var = var - shift * shift;
        let (lo, hi) = (mean - 12.0 * sd, mean + 12.0 * sd);
        let mixture = |u: f64| 0.5 * normal_pdf(u, mean - shift, comp_var) + 0.5 * normal_pdf(u, mean + shift, comp_var);
        let gaussian = |u: f64| normal_pdf(u, mean, var);
        let mixture_gap = neg_entropy_quadrature(mixture, lo, hi, n_quadrature)
            - neg_entropy_quadrature(gaussian, lo, hi, n_quadrature);

        outcomes.push(FocOutcome {
            state: s,
            numerical,
            closed_form,
            phi_numerical,
            phi_closed_form,
            mixture_gap,
            converged,
            relative_error,
        });
    }
    let max_rel = outcomes.iter().map(|o| o.relative_error).fold(0.0, f64::max);
    let violations = outcomes.iter().filter(|o| !(o.mixture_gap > 0.0)).count();
    Ok(FocCheck {
        report: ResidualReport::new("gaussian_foc", states.len(), max_rel, FOC_TOLERANCE),
        mixture_report: ResidualReport::new("gaussian_entropy_dominance", states.len(), violations as f64, 1.0),
        outcomes,
    })
}

/// `n` states drawn uniformly from `t in [0, 0.9 T]`, `x in w +- 2`,
/// `m in [-2, 2]`.
pub fn sample_states(params: &ModelParams, n: usize, seed: u64) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = params.target_w;
    (0..n)
        .map(|_| State {
            t: rng.random_range(0.0..0.9 * params.horizon),
            x: rng.random_range(w - 2.0..w + 2.0),
            m: rng.random_range(-2.0..2.0),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Limits
// ---------------------------------------------------------------------------

/// Grids used by the limit checks.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitGrid {
    pub t: Vec<f64>,
    pub m: Vec<f64>,
    pub x: Vec<f64>,
}

impl LimitGrid {
    pub fn default_for(params: &ModelParams) -> Self {
        let w = params.target_w;
        Self {
            t: linspace(0.0, params.horizon, 11),
            m: symmetric_grid(2.0, 9),
            x: linspace(w - 2.0, w + 2.0, 9),
        }
    }

    fn size(&self) -> usize {
        self.t.len() * self.m.len() * self.x.len()
    }
}

fn unit_relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Known-drift limit: with prior variance `epsilon` the policy should match
///
/// ```text
/// mean = -(m / sigma)(x - w),    variance = tau / (2 sigma^2) exp(m^2 (T - t))
/// ```
///
/// Errors are measured relative to the reference with a unit floor.
pub fn limit_check_known_drift(params_base: &ModelParams, epsilon: f64, grid: &LimitGrid) -> Result<ResidualReport> {
    let params = params_base.with_prior_var(epsilon);
    let model = ClosedForm::new(params)?;
    let sigma = params.sigma;
    let mut max_err = 0.0f64;
    for &t in &grid.t {
        for &m in &grid.m {
            for &x in &grid.x {
                let pol = model.optimal_policy(t, x, m)?;
                let mean_ref = -(m / sigma) * (x - params.target_w);
                let var_ref = params.tau / (2.0 * sigma * sigma) * (m * m * (params.horizon - t)).exp();
                max_err = max_err
                    .max(unit_relative(pol.mean_position, mean_ref))
                    .max(unit_relative(pol.variance, var_ref));
            }
        }
    }
    Ok(ResidualReport::new(
        format!("limit_known_drift_eps{epsilon:e}"),
        grid.size(),
        max_err,
        LIMIT_TOLERANCE,
    ))
}

/// Deterministic limit: across `tau_sequence` the mean position must be
/// bitwise identical, `variance / tau` constant (relative spread), and the
/// variance exactly zero at `tau = 0`. The residual is the worst of the three.
pub fn limit_check_deterministic(params_base: &ModelParams, tau_sequence: &[f64], grid: &LimitGrid) -> Result<ResidualReport> {
    if tau_sequence.is_empty() {
        return Err(Error::Config("tau sequence is empty".into()));
    }
    let models = tau_sequence
        .iter()
        .map(|&tau| ClosedForm::new(params_base.with_tau(tau)))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for &t in &grid.t {
        for &m in &grid.m {
            for &x in &grid.x {
                let policies = models
                    .iter()
                    .map(|c| c.optimal_policy(t, x, m))
                    .collect::<Result<Vec<_>>>()?;
                let first_mean = policies[0].mean_position;
                let mut ratios = Vec::new();
                for (pol, &tau) in policies.iter().zip(tau_sequence) {
                    if pol.mean_position.to_bits() != first_mean.to_bits() {
                        worst = worst.max((pol.mean_position - first_mean).abs().max(f64::MIN_POSITIVE));
                    }
                    if tau == 0.0 {
                        worst = worst.max(pol.variance.abs());
                    } else {
                        ratios.push(pol.variance / tau);
                    }
                }
                if let Some(&r0) = ratios.first() {
                    for r in &ratios {
                        worst = worst.max((r - r0).abs() / r0.abs());
                    }
                }
            }
        }
    }
    Ok(ResidualReport::new(
        "limit_deterministic",
        grid.size() * tau_sequence.len(),
        worst,
        DETERMINISTIC_TOLERANCE,
    ))
}

// ---------------------------------------------------------------------------
// Conviction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ConvictionCheck {
    /// Max relative error of the analytic `m`-derivative; infinite if any
    /// structural property below fails.
    pub report: ResidualReport,
    pub symmetric: bool,
    pub minimized_at_zero: bool,
    pub strictly_monotone: bool,
    pub terminal_collapse: bool,
}

/// Checks the policy variance over a `(t, m)` grid: exact symmetry in `m`,
/// minimum at `m = 0`, strict increase in `|m|` for `t < T`, the identity
/// `d var / dm = -2 alpha m var` against central differences, and a constant
/// row `tau / (2 sigma^2)` at `t = T`.
pub fn conviction_check(model: &ClosedForm, t_grid: &[f64], m_grid: &[f64]) -> Result<ConvictionCheck> {
    let params = *model.params();
    let var = |t: f64, m: f64| model.optimal_policy(t, 0.0, m).map(|p| p.variance);
    let terminal_var = params.tau / (2.0 * params.sigma * params.sigma);
    let mut abs_ms: Vec<f64> = m_grid.iter().map(|m| m.abs()).collect();
    abs_ms.sort_by(f64::total_cmp);
    abs_ms.dedup();

    let mut symmetric = true;
    let mut minimized_at_zero = true;
    let mut strictly_monotone = true;
    let mut terminal_collapse = true;
    let mut max_rel = 0.0f64;
    let h = 1e-5;

    for &t in t_grid {
        let t = params.check_time(t)?;
        let at_zero = var(t, 0.0)?;
        for &m in m_grid {
            let v = var(t, m)?;
            if v.to_bits() != var(t, -m)?.to_bits() {
                symmetric = false;
            }
            if v < at_zero {
                minimized_at_zero = false;
            }
            if t == params.horizon {
                if v != terminal_var {
                    terminal_collapse = false;
                }
                continue;
            }
            let analytic = -2.0 * model.alpha(t)? * m * v;
            let numeric = (var(t, m + h)? - var(t, m - h)?) / (2.0 * h);
            max_rel = max_rel.max(unit_relative(numeric, analytic));
        }
        if t < params.horizon && params.tau > 0.0 {
            let row = abs_ms.iter().map(|&m| var(t, m)).collect::<Result<Vec<_>>>()?;
            if row.windows(2).any(|w| !(w[1] > w[0])) {
                strictly_monotone = false;
            }
        }
    }
    let structural = symmetric && minimized_at_zero && strictly_monotone && terminal_collapse;
    let residual = if structural { max_rel } else { f64::INFINITY };
    Ok(ConvictionCheck {
        report: ResidualReport::new(
            "conviction",
            t_grid.len() * m_grid.len(),
            residual,
            CONVICTION_TOLERANCE,
        ),
        symmetric,
        minimized_at_zero,
        strictly_monotone,
        terminal_collapse,
    })
}

// ---------------------------------------------------------------------------
// Full suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub ode_grid: usize,
    pub ode_step: f64,
    pub hjb_steps: Vec<f64>,
    pub foc_states: usize,
    pub foc_seed: u64,
    pub foc_quadrature: usize,
    pub known_drift_epsilon: f64,
    pub tau_sequence: Vec<f64>,
    pub conviction_t_points: usize,
    pub conviction_m_points: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            ode_grid: 1000,
            ode_step: 1e-5,
            hjb_steps: vec![4e-3, 2e-3, 1e-3],
            foc_states: 20,
            foc_seed: 7,
            foc_quadrature: 4000,
            known_drift_epsilon: 1e-10,
            tau_sequence: vec![1.0, 0.1, 0.01, 0.0],
            conviction_t_points: 101,
            conviction_m_points: 121,
        }
    }
}

/// Acceptable window for the observed HJB convergence order.
pub const HJB_SLOPE_RANGE: (f64, f64) = (1.7, 2.3);

/// Runs every check on one parameter set and returns the reports in a fixed
/// order.
pub fn run_all(model: &ClosedForm, opts: &VerifyOptions) -> Result<Vec<ResidualReport>> {
    let params = *model.params();
    let mut reports = riccati_residuals(model, opts.ode_grid, opts.ode_step, Stencil::FivePoint)?;

    let grid = HjbGrid::default_for(&params);
    let (hjb, slope) = hjb_convergence(model, &grid, &opts.hjb_steps)?;
    let finest = opts.hjb_steps.iter().copied().fold(f64::INFINITY, f64::min);
    for (mut r, &h) in hjb.into_iter().zip(&opts.hjb_steps) {
        if h > finest {
            // coarser steps only feed the convergence order
            r.tolerance = f64::INFINITY;
            r.passed = r.max_abs_residual.is_finite();
        }
        reports.push(r);
    }
    let (lo, hi) = HJB_SLOPE_RANGE;
    let centre = 0.5 * (lo + hi);
    reports.push(ResidualReport::new(
        "hjb_convergence_order",
        opts.hjb_steps.len(),
        (slope - centre).abs(),
        0.5 * (hi - lo),
    ));

    if params.tau > 0.0 {
        let states = sample_states(&params, opts.foc_states, opts.foc_seed);
        let foc = gaussian_foc_check(model, &states, opts.foc_quadrature)?;
        reports.push(foc.report);
        reports.push(foc.mixture_report);
    }

    let limit_grid = LimitGrid::default_for(&params);
    reports.push(limit_check_known_drift(&params, opts.known_drift_epsilon, &limit_grid)?);
    reports.push(limit_check_deterministic(&params, &opts.tau_sequence, &limit_grid)?);

    let t_grid = linspace(0.0, params.horizon, opts.conviction_t_points);
    let m_grid = symmetric_grid(2.0, opts.conviction_m_points);
    reports.push(conviction_check(model, &t_grid, &m_grid)?.report);
    Ok(reports)
}

/// Random parameter draws over `sigma in [0.05, 0.5]`, `T in [0.25, 4]`,
/// `tau in [0.1, 4]`, `P0 in [0, 4]`, `m0 in [-2, 2]`, `w in [-2, 2]`.
pub fn random_parameter_draws(seed: u64, n: usize) -> Vec<ModelParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| ModelParams {
            sigma: rng.random_range(0.05..=0.5),
            horizon: rng.random_range(0.25..=4.0),
            tau: rng.random_range(0.1..=4.0),
            prior_var: rng.random_range(0.0..=4.0),
            prior_mean: rng.random_range(-2.0..=2.0),
            target_w: rng.random_range(-2.0..=2.0),
        })
        .collect()
}
