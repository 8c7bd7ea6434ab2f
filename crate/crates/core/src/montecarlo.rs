//! Controlled simulation of the joint (belief, wealth) system under the
//! optimal Gaussian policy.
//!
//! The relaxed control is sampled as
//!
//! ```text
//! dX = sigma u m dt + sigma u dW_hat + sigma s dB,    dm = P_t dW_hat
//! ```
//!
//! with `dB` independent of the innovation `dW_hat`, which reproduces the drift,
//! quadratic variation `sigma^2 (u^2 + s^2) dt` and covariation
//! `sigma u P_t dt` of the controlled generator.

use rayon::prelude::*;

use crate::coefficients::{posterior_variance_unchecked, ClosedForm, GaussianPolicy};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::rng::PathRng;
use crate::stats::{mean_stderr, z_score};

pub const MIN_STEPS: usize = 10;

/// Which Brownian representation drives a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimulationMode {
    /// Draw the innovation process directly.
    Innovation,
    /// Draw a true drift from the prior and the physical Brownian motion,
    /// then form the innovation from the filter.
    Physical,
}

impl SimulationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SimulationMode::Innovation => "innovation",
            SimulationMode::Physical => "physical",
        }
    }
}

impl std::str::FromStr for SimulationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "innovation" => Ok(SimulationMode::Innovation),
            "physical" => Ok(SimulationMode::Physical),
            other => Err(Error::Config(format!(
                "unknown simulation mode `{other}` (expected innovation or physical)"
            ))),
        }
    }
}

/// Per-path outcomes of a controlled simulation. Quarantined (non-finite)
/// paths are dropped from every array and counted in `quarantined`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub terminal_wealth: Vec<f64>,
    pub terminal_cost: Vec<f64>,
    pub entropy_cost: Vec<f64>,
    pub terminal_belief: Vec<f64>,
    pub mode: SimulationMode,
    pub quarantined: usize,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.terminal_cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminal_cost.is_empty()
    }

    pub fn total_cost(&self) -> Vec<f64> {
        self.terminal_cost
            .iter()
            .zip(&self.entropy_cost)
            .map(|(a, b)| a + b)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub x0: f64,
    pub mode: SimulationMode,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Multiplier on the optimal mean position; 1 is the optimal policy.
    pub mean_scale: f64,
}

impl SimulationSpec {
    pub fn new(x0: f64, n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            x0,
            mode: SimulationMode::Innovation,
            n_paths,
            n_steps,
            seed,
            mean_scale: 1.0,
        }
    }

    pub fn mode(mut self, mode: SimulationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mean_scale(mut self, scale: f64) -> Self {
        self.mean_scale = scale;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", 0.0, "must be >= 1"));
        }
        if self.n_steps < MIN_STEPS {
            return Err(Error::InsufficientSteps {
                n_steps: self.n_steps,
                min: MIN_STEPS,
            });
        }
        if !self.x0.is_finite() {
            return Err(Error::invalid("x0", self.x0, "must be finite"));
        }
        if !self.mean_scale.is_finite() {
            return Err(Error::invalid("mean_scale", self.mean_scale, "must be finite"));
        }
        Ok(())
    }
}

/// Coefficients along the simulation grid, shared by all paths.
struct Schedule {
    dt: f64,
    posterior_var: Vec<f64>,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
}

impl Schedule {
    fn new(model: &ClosedForm, n_steps: usize) -> Self {
        let params = model.params();
        let dt = params.horizon / n_steps as f64;
        let times = (0..n_steps).map(|k| k as f64 * dt);
        Self {
            dt,
            posterior_var: times
                .clone()
                .map(|t| posterior_variance_unchecked(t, params.prior_var))
                .collect(),
            alpha: times.clone().map(|t| model.alpha_unchecked(t)).collect(),
            gamma: times.map(|t| model.gamma_unchecked(t)).collect(),
        }
    }
}

/// Wealth and belief at a grid point, with entropy cost accrued so far.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PathState {
    x: f64,
    m: f64,
    entropy: f64,
}

/// One Euler step of the controlled system. Returns `(dX, dm)`.
#[inline]
fn increments(
    sigma: f64,
    policy: &GaussianPolicy,
    m: f64,
    p: f64,
    dt: f64,
    dw_hat: f64,
    db: f64,
) -> (f64, f64) {
    let u = policy.mean_position;
    let s = policy.variance.sqrt();
    let dx = sigma * u * m * dt + sigma * u * dw_hat + sigma * s * db;
    (dx, p * dw_hat)
}

struct PathOutcome {
    terminal: PathState,
    checkpoints: Vec<PathState>,
    finite: bool,
}

fn run_path(
    params: &ModelParams,
    schedule: &Schedule,
    spec: &SimulationSpec,
    checkpoint_steps: &[usize],
    path_index: u64,
) -> PathOutcome {
    let mut rng = PathRng::new(spec.seed, path_index);
    let rho = match spec.mode {
        SimulationMode::Physical => rng.normal(params.prior_mean, params.prior_var),
        SimulationMode::Innovation => 0.0,
    };
    let dt = schedule.dt;
    let sqrt_dt = dt.sqrt();
    let mut state = PathState {
        x: spec.x0,
        m: params.prior_mean,
        entropy: 0.0,
    };
    let mut checkpoints = Vec::with_capacity(checkpoint_steps.len());
    let record = |k: usize, state: &PathState, out: &mut Vec<PathState>| {
        for &c in checkpoint_steps {
            if c == k {
                out.push(*state);
            }
        }
    };
    record(0, &state, &mut checkpoints);
    for k in 0..spec.n_steps {
        let p = schedule.posterior_var[k];
        let mut policy = GaussianPolicy::optimal(
            schedule.alpha[k],
            schedule.gamma[k],
            p,
            state.x,
            state.m,
            params,
        );
        policy.mean_position *= spec.mean_scale;

        let z_w = rng.standard_normal();
        let z_b = rng.standard_normal();
        let dw_hat = match spec.mode {
            SimulationMode::Innovation => sqrt_dt * z_w,
            SimulationMode::Physical => (rho - state.m) * dt + sqrt_dt * z_w,
        };
        if params.tau > 0.0 {
            state.entropy += params.tau * policy.neg_entropy() * dt;
        }
        let (dx, dm) = increments(params.sigma, &policy, state.m, p, dt, dw_hat, sqrt_dt * z_b);
        state.x += dx;
        state.m += dm;
        if !state.x.is_finite() || !state.m.is_finite() {
            return PathOutcome {
                terminal: state,
                checkpoints,
                finite: false,
            };
        }
        record(k + 1, &state, &mut checkpoints);
    }
    PathOutcome {
        terminal: state,
        checkpoints,
        finite: true,
    }
}

fn simulate_inner(
    params: &ModelParams,
    spec: &SimulationSpec,
    checkpoint_steps: &[usize],
) -> Result<Vec<PathOutcome>> {
    params.validate()?;
    spec.validate()?;
    let model = ClosedForm::new(*params)?;
    let schedule = Schedule::new(&model, spec.n_steps);
    Ok((0..spec.n_paths as u64)
        .into_par_iter()
        .map(|i| run_path(params, &schedule, spec, checkpoint_steps, i))
        .collect())
}

/// Simulates the optimally controlled system (or a mean-scaled perturbation
/// of it, see [`SimulationSpec::mean_scale`]).
pub fn simulate(params: &ModelParams, spec: &SimulationSpec) -> Result<PathEnsemble> {
    let outcomes = simulate_inner(params, spec, &[])?;
    let mut ens = PathEnsemble {
        terminal_wealth: Vec::with_capacity(outcomes.len()),
        terminal_cost: Vec::with_capacity(outcomes.len()),
        entropy_cost: Vec::with_capacity(outcomes.len()),
        terminal_belief: Vec::with_capacity(outcomes.len()),
        mode: spec.mode,
        quarantined: 0,
    };
    for o in outcomes {
        if !o.finite {
            ens.quarantined += 1;
            continue;
        }
        let dx = o.terminal.x - params.target_w;
        ens.terminal_wealth.push(o.terminal.x);
        ens.terminal_cost.push(dx * dx);
        ens.entropy_cost.push(o.terminal.entropy);
        ens.terminal_belief.push(o.terminal.m);
    }
    Ok(ens)
}

pub fn simulate_controlled(
    params: &ModelParams,
    x0: f64,
    mode: SimulationMode,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    simulate(params, &SimulationSpec::new(x0, n_paths, n_steps, seed).mode(mode))
}

/// Monte Carlo estimate of the entropy-regularized objective and its
/// standard error.
pub fn estimate_objective(ensemble: &PathEnsemble) -> Result<(f64, f64)> {
    if ensemble.is_empty() {
        return Err(Error::invalid("n_paths", 0.0, "ensemble is empty"));
    }
    Ok(mean_stderr(&ensemble.total_cost()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingalePoint {
    /// Grid time actually used (checkpoints snap to the simulation grid).
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    /// `V(0, x0, m0)`.
    pub target: f64,
}

impl MartingalePoint {
    pub fn z_score(&self) -> f64 {
        z_score(self.mean, self.target, self.stderr)
    }
}

/// Sample mean of `M_t = V(t, X_t, m_t) + accrued entropy cost` at each
/// checkpoint. Under the optimal policy each mean should match `V(0, x0, m0)`.
pub fn martingale_diagnostic(
    params: &ModelParams,
    spec: &SimulationSpec,
    checkpoints: &[f64],
) -> Result<Vec<MartingalePoint>> {
    spec.validate()?;
    let dt = params.horizon / spec.n_steps as f64;
    let mut steps = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        let t = params.check_time(t)?;
        steps.push((t / dt).round() as usize);
    }
    let model = ClosedForm::new(*params)?.deterministic_limit(true);
    let target = model.value(0.0, spec.x0, params.prior_mean)?;
    let outcomes = simulate_inner(params, spec, &steps)?;
    let finite: Vec<&PathOutcome> = outcomes.iter().filter(|o| o.finite).collect();
    if finite.is_empty() {
        return Err(Error::invalid("n_paths", 0.0, "every path was quarantined"));
    }

    let mut points = Vec::with_capacity(steps.len());
    for (j, &k) in steps.iter().enumerate() {
        let t = if k == spec.n_steps { params.horizon } else { k as f64 * dt };
        if k == 0 {
            points.push(MartingalePoint {
                t,
                mean: target,
                stderr: 0.0,
                target,
            });
            continue;
        }
        let coeffs = model.coefficients(t)?;
        let samples: Vec<f64> = finite
            .iter()
            .map(|o| {
                let s = o.checkpoints[j];
                coeffs.value(s.x, s.m, params.target_w) + s.entropy
            })
            .collect();
        let (mean, stderr) = mean_stderr(&samples);
        points.push(MartingalePoint {
            t,
            mean,
            stderr,
            target,
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierRow {
    pub w: f64,
    pub mean_terminal: f64,
    pub std_terminal: f64,
    pub stderr_mean: f64,
}

/// Traces the mean/std frontier by sweeping the target `w`. Every target
/// reuses the same seed so the sweep shares random numbers.
pub fn frontier_sweep(
    params: &ModelParams,
    spec: &SimulationSpec,
    w_grid: &[f64],
) -> Result<Vec<FrontierRow>> {
    if w_grid.is_empty() {
        return Err(Error::Config("w grid is empty".into()));
    }
    w_grid
        .iter()
        .map(|&w| {
            let ens = simulate(&params.with_target(w), spec)?;
            let (mean, stderr) = mean_stderr(&ens.terminal_wealth);
            let std = if ens.len() > 1 {
                stderr * (ens.len() as f64).sqrt()
            } else {
                0.0
            };
            Ok(FrontierRow {
                w,
                mean_terminal: mean,
                std_terminal: std,
                stderr_mean: stderr,
            })
        })
        .collect()
}

/// Empirical one-step increment moments from a fixed state, used to check
/// the sampled representation against the generator coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementMoments {
    pub policy: GaussianPolicy,
    pub posterior_var: f64,
    pub dt: f64,
    pub mean_dx: (f64, f64),
    pub var_dx: (f64, f64),
    pub cov_dx_dm: (f64, f64),
}

/// Draws `n_samples` independent single steps of size `dt` from
/// `(t, x, m)` in innovation mode. Each pair is `(estimate, stderr)`.
pub fn increment_moments(
    params: &ModelParams,
    t: f64,
    x: f64,
    m: f64,
    dt: f64,
    n_samples: usize,
    seed: u64,
) -> Result<IncrementMoments> {
    let model = ClosedForm::new(*params)?;
    let policy = model.optimal_policy(t, x, m)?;
    let p = model.posterior_variance(t)?;
    if n_samples < 2 {
        return Err(Error::invalid("n_samples", n_samples as f64, "must be >= 2"));
    }
    let sqrt_dt = dt.sqrt();
    let draws: Vec<(f64, f64)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = PathRng::new(seed, i);
            let dw_hat = sqrt_dt * rng.standard_normal();
            let db = sqrt_dt * rng.standard_normal();
            increments(params.sigma, &policy, m, p, dt, dw_hat, db)
        })
        .collect();
    let dxs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let (mean_x, se_x) = mean_stderr(&dxs);
    let mean_m = draws.iter().map(|d| d.1).sum::<f64>() / n_samples as f64;
    let sq: Vec<f64> = dxs.iter().map(|dx| (dx - mean_x).powi(2)).collect();
    let cross: Vec<f64> = draws
        .iter()
        .map(|(dx, dm)| (dx - mean_x) * (dm - mean_m))
        .collect();
    Ok(IncrementMoments {
        policy,
        posterior_var: p,
        dt,
        mean_dx: (mean_x, se_x),
        var_dx: mean_stderr(&sq),
        cov_dx_dm: mean_stderr(&cross),
    })
}
