//! Command-line runner: configuration merging and the CSV-producing
//! subcommands.
//!
//! Precedence for every setting is built-in default < config file < flag;
//! the output directory additionally honours `MVBAYES_OUT` above the
//! built-in default.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::coefficients::ClosedForm;
use crate::error::{Error, Result};
use crate::filter::{simulate_filter_paths, DriftMode};
use crate::montecarlo::{
    estimate_objective, frontier_sweep, martingale_diagnostic, simulate, SimulationMode, SimulationSpec,
};
use crate::params::ModelParams;
use crate::stats::z_score;
use crate::verify::{self, linspace, symmetric_grid, ResidualReport, VerifyOptions};

pub const OUT_DIR_ENV: &str = "MVBAYES_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_IO: i32 = 2;

/// Which representations `simulate` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Innovation,
    Physical,
    Both,
}

/// Every tunable of a run. All fields have defaults; a config file may set
/// any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sigma: f64,
    pub horizon: f64,
    pub tau: f64,
    pub target_w: f64,
    pub prior_mean: f64,
    pub prior_var: f64,
    pub x0: f64,
    /// True Sharpe ratio for `paths`; `null` draws one per path from the prior.
    pub rho: Option<f64>,
    /// Defaults per command: paths 5, simulate 100000, frontier 10000.
    pub n_paths: Option<usize>,
    pub n_steps: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub quadrature: usize,
    pub mode: ModeChoice,
    pub heatmap_t_points: usize,
    pub heatmap_m_points: usize,
    pub heatmap_m_max: f64,
    pub frontier_points: usize,
    pub frontier_span: f64,
    pub sweep: bool,
    pub sweep_draws: usize,
    /// Test hook: constant offset added to alpha before verification.
    pub inject_alpha_fault: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            sigma: p.sigma,
            horizon: p.horizon,
            tau: p.tau,
            target_w: p.target_w,
            prior_mean: p.prior_mean,
            prior_var: p.prior_var,
            x0: 0.0,
            rho: Some(1.0),
            n_paths: None,
            n_steps: 200,
            seed: 2024,
            out: None,
            quadrature: crate::coefficients::DEFAULT_QUADRATURE_INTERVALS,
            mode: ModeChoice::Innovation,
            heatmap_t_points: 101,
            heatmap_m_points: 121,
            heatmap_m_max: 2.0,
            frontier_points: 21,
            frontier_span: 2.0,
            sweep: false,
            sweep_draws: 10,
            inject_alpha_fault: 0.0,
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            sigma: self.sigma,
            horizon: self.horizon,
            tau: self.tau,
            target_w: self.target_w,
            prior_mean: self.prior_mean,
            prior_var: self.prior_var,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "mvbayes", version, about = "Entropy-regularized mean-variance control under drift uncertainty")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Posterior-mean sample paths with the policy variance along each path.
    Paths(Flags),
    /// Policy variance over the (t, m) plane.
    Heatmap(Flags),
    /// Monte Carlo objective and martingale check against the closed form.
    Simulate(Flags),
    /// Mean/std of terminal wealth across a sweep of targets.
    Frontier(Flags),
    /// Run every numerical identity check.
    Verify(Flags),
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides MVBAYES_OUT).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub n_steps: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub target_w: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub prior_mean: Option<f64>,
    #[arg(long)]
    pub prior_var: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Draw the true Sharpe ratio per path from the prior (`paths`).
    #[arg(long)]
    pub prior_sampled: bool,
    #[arg(long)]
    pub quadrature: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeChoice>,
    /// Ten (or `sweep_draws`) randomized parameter sets in `verify`.
    #[arg(long)]
    pub sweep: bool,
    /// Test hook for `verify`: shift alpha by this constant.
    #[arg(long, allow_hyphen_values = true)]
    pub inject_alpha_fault: Option<f64>,
}

impl Flags {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        set!(seed, n_steps, sigma, horizon, tau, target_w, prior_mean, prior_var, x0, quadrature, mode, inject_alpha_fault);
        if let Some(n) = self.n_paths {
            cfg.n_paths = Some(n);
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(rho) = self.rho {
            cfg.rho = Some(rho);
        }
        if self.prior_sampled {
            cfg.rho = None;
        }
        if self.sweep {
            cfg.sweep = true;
        }
        Ok(cfg)
    }
}

/// Renders a float with 17 significant digits (round-trip exact).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV body built in memory and written in one shot.
struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    fn write(self, dir: &Path, name: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, self.text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

fn model(cfg: &RunConfig) -> Result<ClosedForm> {
    Ok(ClosedForm::new(cfg.params())?.with_quadrature(cfg.quadrature))
}

/// Result of a subcommand: files written and whether every gate passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
    pub summary: String,
}

pub fn cmd_paths(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params();
    let model = model(cfg)?;
    let mode = match cfg.rho {
        Some(rho) => DriftMode::FixedRho(rho),
        None => DriftMode::PriorSampled,
    };
    let n_paths = cfg.n_paths.unwrap_or(5);
    let paths = simulate_filter_paths(&params, mode, n_paths, cfg.n_steps, cfg.seed)?;
    let dir = prepare_out(cfg)?;
    let mut csv = Csv::new(&["path_id", "t", "m", "policy_variance"]);
    for (id, path) in paths.iter().enumerate() {
        for (&t, &m) in path.times.iter().zip(&path.m_values) {
            let var = model.optimal_policy(t, 0.0, m)?.variance;
            csv.row(&[id.to_string(), fmt_f64(t), fmt_f64(m), fmt_f64(var)]);
        }
    }
    let file = csv.write(&dir, "paths.csv")?;
    Ok(Outcome {
        files: vec![file],
        passed: true,
        summary: format!("{n_paths} paths x {} steps", cfg.n_steps),
    })
}

pub fn cmd_heatmap(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params();
    let model = model(cfg)?;
    let dir = prepare_out(cfg)?;
    let mut csv = Csv::new(&["t", "m", "policy_variance"]);
    let ts = linspace(0.0, params.horizon, cfg.heatmap_t_points);
    let ms = symmetric_grid(cfg.heatmap_m_max, cfg.heatmap_m_points);
    for &t in &ts {
        for &m in &ms {
            let var = model.optimal_policy(t, 0.0, m)?.variance;
            csv.row(&[fmt_f64(t), fmt_f64(m), fmt_f64(var)]);
        }
    }
    let file = csv.write(&dir, "heatmap.csv")?;
    Ok(Outcome {
        files: vec![file],
        passed: true,
        summary: format!("{} x {} grid", ts.len(), ms.len()),
    })
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params();
    let n_paths = cfg.n_paths.unwrap_or(100_000);
    let closed = ClosedForm::new(params)?
        .with_quadrature(cfg.quadrature)
        .deterministic_limit(true)
        .value(0.0, cfg.x0, params.prior_mean)?;
    let base = SimulationSpec::new(cfg.x0, n_paths, cfg.n_steps, cfg.seed);
    let primary_mode = match cfg.mode {
        ModeChoice::Physical => SimulationMode::Physical,
        _ => SimulationMode::Innovation,
    };
    let dir = prepare_out(cfg)?;
    let mut files = Vec::new();
    let mut summary = String::new();

    let ens = simulate(&params, &base.mode(primary_mode))?;
    let (estimate, stderr) = estimate_objective(&ens)?;
    let z = z_score(estimate, closed, stderr);
    let mut passed = z.abs() <= 3.0 && ens.quarantined == 0;
    let mut csv = Csv::new(&["estimate", "stderr", "closed_form_value", "z_score"]);
    csv.row(&[fmt_f64(estimate), fmt_f64(stderr), fmt_f64(closed), fmt_f64(z)]);
    files.push(csv.write(&dir, "objective.csv")?);
    let _ = writeln!(
        summary,
        "{}: estimate {estimate:.6} +- {stderr:.6}, closed form {closed:.6}, z = {z:.3}, quarantined {}",
        primary_mode.as_str(),
        ens.quarantined
    );

    if cfg.mode == ModeChoice::Both {
        // physical run on a distinct seed so the two estimates are independent
        let phys = simulate(
            &params,
            &SimulationSpec {
                seed: cfg.seed.wrapping_add(1),
                ..base
            }
            .mode(SimulationMode::Physical),
        )?;
        let (pe, ps) = estimate_objective(&phys)?;
        let combined = (stderr * stderr + ps * ps).sqrt();
        let mz = z_score(estimate, pe, combined);
        passed &= mz.abs() <= 3.0 && phys.quarantined == 0;
        let mut csv = Csv::new(&[
            "innovation_estimate",
            "innovation_stderr",
            "physical_estimate",
            "physical_stderr",
            "z_score",
        ]);
        csv.row(&[fmt_f64(estimate), fmt_f64(stderr), fmt_f64(pe), fmt_f64(ps), fmt_f64(mz)]);
        files.push(csv.write(&dir, "mode_agreement.csv")?);
        let _ = writeln!(summary, "physical: estimate {pe:.6} +- {ps:.6}, mode agreement z = {mz:.3}");
    }

    let checkpoints = [0.5 * params.horizon, params.horizon];
    let points = martingale_diagnostic(&params, &base.mode(primary_mode), &checkpoints)?;
    let mut csv = Csv::new(&["t", "mean", "stderr", "closed_form_value", "z_score"]);
    for p in &points {
        csv.row(&[
            fmt_f64(p.t),
            fmt_f64(p.mean),
            fmt_f64(p.stderr),
            fmt_f64(p.target),
            fmt_f64(p.z_score()),
        ]);
        let _ = writeln!(summary, "martingale t={:.4}: mean {:.6} +- {:.6}, z = {:.3}", p.t, p.mean, p.stderr, p.z_score());
    }
    files.push(csv.write(&dir, "martingale.csv")?);
    Ok(Outcome { files, passed, summary })
}

pub fn cmd_frontier(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params();
    let n_paths = cfg.n_paths.unwrap_or(10_000);
    let w_grid = linspace(cfg.x0, cfg.x0 + cfg.frontier_span, cfg.frontier_points);
    let mode = match cfg.mode {
        ModeChoice::Physical => SimulationMode::Physical,
        _ => SimulationMode::Innovation,
    };
    let spec = SimulationSpec::new(cfg.x0, n_paths, cfg.n_steps, cfg.seed).mode(mode);
    let rows = frontier_sweep(&params, &spec, &w_grid)?;
    let dir = prepare_out(cfg)?;
    let mut csv = Csv::new(&["w", "mean_terminal", "std_terminal", "stderr_mean"]);
    for r in &rows {
        csv.row(&[
            fmt_f64(r.w),
            fmt_f64(r.mean_terminal),
            fmt_f64(r.std_terminal),
            fmt_f64(r.stderr_mean),
        ]);
    }
    let file = csv.write(&dir, "frontier.csv")?;
    Ok(Outcome {
        files: vec![file],
        passed: true,
        summary: format!("{} targets, {n_paths} paths each", rows.len()),
    })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let opts = VerifyOptions::default();
    let base = model(cfg)?.inject_alpha_fault(cfg.inject_alpha_fault);
    let mut reports = verify::run_all(&base, &opts)?;
    if cfg.sweep {
        for (i, params) in verify::random_parameter_draws(cfg.seed, cfg.sweep_draws).into_iter().enumerate() {
            let m = ClosedForm::new(params)?
                .with_quadrature(cfg.quadrature)
                .inject_alpha_fault(cfg.inject_alpha_fault);
            reports.extend(verify::run_all(&m, &opts)?.into_iter().map(|mut r| {
                r.name = format!("draw{i}/{}", r.name);
                r
            }));
        }
    }
    let dir = prepare_out(cfg)?;
    let file = write_reports(&dir, &reports)?;
    let failed: Vec<&ResidualReport> = reports.iter().filter(|r| !r.passed).collect();
    let mut summary = format!("{} checks, {} failed", reports.len(), failed.len());
    for r in failed {
        let _ = write!(summary, "\n  FAIL {}: {:e} >= {:e}", r.name, r.max_abs_residual, r.tolerance);
    }
    Ok(Outcome {
        files: vec![file],
        passed: reports.iter().all(|r| r.passed),
        summary,
    })
}

pub fn write_reports(dir: &Path, reports: &[ResidualReport]) -> Result<PathBuf> {
    let mut csv = Csv::new(&["name", "grid_size", "max_abs_residual", "tolerance", "passed"]);
    for r in reports {
        csv.row(&[
            r.name.clone(),
            r.grid_size.to_string(),
            fmt_f64(r.max_abs_residual),
            fmt_f64(r.tolerance),
            r.passed.to_string(),
        ]);
    }
    csv.write(dir, "verify.csv")
}

pub fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::Paths(f) => cmd_paths(&f.resolve()?),
        Command::Heatmap(f) => cmd_heatmap(&f.resolve()?),
        Command::Simulate(f) => cmd_simulate(&f.resolve()?),
        Command::Frontier(f) => cmd_frontier(&f.resolve()?),
        Command::Verify(f) => cmd_verify(&f.resolve()?),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code: 0 success, 1 failed check, 2 I/O or config error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_IO } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.passed {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_IO
        }
    }
}
