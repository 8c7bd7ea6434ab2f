//! Kalman-Bucy posterior dynamics for the unknown Sharpe ratio.
//!
//! The posterior variance is deterministic and taken in closed form; only the
//! posterior mean is stepped: `m <- m + P_t (dY - m dt)` with `P_t` at the left
//! endpoint.

use rayon::prelude::*;

use crate::coefficients::posterior_variance_unchecked;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::rng::PathRng;

/// How the true Sharpe ratio behind the observations is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftMode {
    /// Every path observes the same realized drift.
    FixedRho(f64),
    /// Each path draws its drift once from the prior `Normal(m0, P0)`.
    PriorSampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterPath {
    pub times: Vec<f64>,
    pub m_values: Vec<f64>,
    pub rho_true: Option<f64>,
}

/// One Euler-Maruyama update of the posterior mean.
pub fn filter_step(m: f64, t: f64, dy: f64, dt: f64, p0: f64) -> Result<f64> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", dt, "must be > 0"));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", t, "must be >= 0"));
    }
    if !(p0.is_finite() && p0 >= 0.0) {
        return Err(Error::invalid("prior_var", p0, "must be finite and >= 0"));
    }
    Ok(step_unchecked(m, t, dy, dt, p0))
}

#[inline]
fn step_unchecked(m: f64, t: f64, dy: f64, dt: f64, p0: f64) -> f64 {
    m + posterior_variance_unchecked(t, p0) * (dy - m * dt)
}

fn validate(params: &ModelParams, mode: DriftMode, n_paths: usize, n_steps: usize) -> Result<()> {
    params.validate()?;
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", 0.0, "must be >= 1"));
    }
    if n_steps == 0 {
        return Err(Error::invalid("n_steps", 0.0, "must be >= 1"));
    }
    if let DriftMode::FixedRho(rho) = mode {
        if !rho.is_finite() {
            return Err(Error::invalid("rho", rho, "must be finite"));
        }
    }
    Ok(())
}

/// Runs one path, calling `visit(step_index, m)` at every grid point
/// including `t = 0`. Returns the realized drift.
fn run_path<F: FnMut(usize, f64)>(
    params: &ModelParams,
    mode: DriftMode,
    n_steps: usize,
    seed: u64,
    path_index: u64,
    mut visit: F,
) -> f64 {
    let mut rng = PathRng::new(seed, path_index);
    let rho = match mode {
        DriftMode::FixedRho(rho) => rho,
        DriftMode::PriorSampled => rng.normal(params.prior_mean, params.prior_var),
    };
    let dt = params.horizon / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut m = params.prior_mean;
    visit(0, m);
    for k in 0..n_steps {
        let t = k as f64 * dt;
        let dy = rho * dt + sqrt_dt * rng.standard_normal();
        m = step_unchecked(m, t, dy, dt, params.prior_var);
        visit(k + 1, m);
    }
    rho
}

/// Uniform grid `k T / n_steps`, `k = 0..=n_steps`; the last point is `T` exactly.
pub fn time_grid(horizon: f64, n_steps: usize) -> Vec<f64> {
    let dt = horizon / n_steps as f64;
    (0..=n_steps)
        .map(|k| if k == n_steps { horizon } else { k as f64 * dt })
        .collect()
}

/// Simulates `n_paths` posterior-mean trajectories. Path `i` depends only on
/// `(seed, i, mode, params, n_steps)`.
pub fn simulate_filter_paths(
    params: &ModelParams,
    mode: DriftMode,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<FilterPath>> {
    validate(params, mode, n_paths, n_steps)?;
    let times = time_grid(params.horizon, n_steps);
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut m_values = Vec::with_capacity(n_steps + 1);
            let rho = run_path(params, mode, n_steps, seed, i, |_, m| m_values.push(m));
            FilterPath {
                times: times.clone(),
                m_values,
                rho_true: Some(rho),
            }
        })
        .collect())
}

/// Cross-sections of the same paths `simulate_filter_paths` would produce,
/// without storing full trajectories: `result[j][i]` is `m` of path `i` at grid
/// index `step_indices[j]`.
pub fn filter_marginals(
    params: &ModelParams,
    mode: DriftMode,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    step_indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    validate(params, mode, n_paths, n_steps)?;
    if let Some(&bad) = step_indices.iter().find(|&&k| k > n_steps) {
        return Err(Error::invalid("step_index", bad as f64, "beyond the time grid"));
    }
    let per_path: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut out = vec![0.0; step_indices.len()];
            run_path(params, mode, n_steps, seed, i, |k, m| {
                for (slot, &want) in out.iter_mut().zip(step_indices) {
                    if want == k {
                        *slot = m;
                    }
                }
            });
            out
        })
        .collect();
    Ok((0..step_indices.len())
        .map(|j| per_path.iter().map(|row| row[j]).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_examples() {
        assert_eq!(filter_step(0.7, 0.3, 5.0, 0.01, 0.0).unwrap(), 0.7);
        assert!((filter_step(0.0, 0.0, 0.1, 0.01, 1.0).unwrap() - 0.1).abs() < 1e-15);
        let m = 0.4;
        assert_eq!(filter_step(m, 0.2, m * 0.01, 0.01, 1.0).unwrap(), m);
        assert!(filter_step(0.0, 0.0, 0.1, 0.0, 1.0).is_err());
        assert!(filter_step(0.0, 0.0, 0.1, -0.1, 1.0).is_err());
    }

    #[test]
    fn degenerate_prior_never_learns() {
        let p = ModelParams::default().with_prior_var(0.0).with_prior_mean(0.3);
        let paths = simulate_filter_paths(&p, DriftMode::FixedRho(2.0), 4, 50, 9).unwrap();
        for path in &paths {
            assert_eq!(path.m_values.len(), 51);
            assert!(path.m_values.iter().all(|&m| m == 0.3));
        }
    }

    #[test]
    fn deterministic_and_consistent_with_marginals() {
        let p = ModelParams::default();
        let a = simulate_filter_paths(&p, DriftMode::PriorSampled, 16, 40, 11).unwrap();
        let b = simulate_filter_paths(&p, DriftMode::PriorSampled, 16, 40, 11).unwrap();
        assert_eq!(a, b);
        let marg = filter_marginals(&p, DriftMode::PriorSampled, 16, 40, 11, &[0, 10, 40]).unwrap();
        for (i, path) in a.iter().enumerate() {
            assert_eq!(path.m_values[0], p.prior_mean);
            assert_eq!(marg[0][i], path.m_values[0]);
            assert_eq!(marg[1][i], path.m_values[10]);
            assert_eq!(marg[2][i], path.m_values[40]);
        }
        assert_eq!(a[0].times.last().copied(), Some(1.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ModelParams::default();
        assert!(simulate_filter_paths(&p, DriftMode::PriorSampled, 0, 10, 1).is_err());
        assert!(simulate_filter_paths(&p, DriftMode::PriorSampled, 1, 0, 1).is_err());
        assert!(simulate_filter_paths(&p, DriftMode::FixedRho(f64::NAN), 1, 1, 1).is_err());
        assert!(filter_marginals(&p, DriftMode::PriorSampled, 1, 5, 1, &[6]).is_err());
    }
}
