//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mvbayes::filter::{filter_marginals, DriftMode};
use mvbayes::montecarlo::{estimate_objective, martingale_diagnostic, simulate, SimulationMode, SimulationSpec};
use mvbayes::stats::{mean_stderr, variance_stderr};
use mvbayes::verify::{
    conviction_check, gaussian_foc_check, hjb_convergence, limit_check_deterministic, limit_check_known_drift,
    linspace, random_parameter_draws, riccati_residuals, sample_states, symmetric_grid, HjbGrid, LimitGrid, Stencil,
    HJB_SLOPE_RANGE, ODE_TOLERANCE, PDE_TOLERANCE,
};
use mvbayes::{ClosedForm, ModelParams};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn within_budget(elapsed: Duration, budget_secs: f64) -> bool {
    elapsed.as_secs_f64() < budget_secs
}

fn riccati() -> Verdict {
    let start = Instant::now();
    let mut sets = vec![ModelParams::default()];
    sets.extend(random_parameter_draws(2024, 10));
    let mut worst = 0.0f64;
    for p in &sets {
        let model = ClosedForm::new(*p).unwrap();
        for r in riccati_residuals(&model, 1000, 1e-5, Stencil::FivePoint).unwrap() {
            worst = worst.max(r.max_abs_residual);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst < ODE_TOLERANCE && within_budget(elapsed, 1.0),
        format!("max residual {worst:.3e} over {} parameter sets, {elapsed:.2?}", sets.len()),
    )
}

fn hjb() -> Verdict {
    let start = Instant::now();
    let p = ModelParams::default();
    let model = ClosedForm::new(p).unwrap();
    let grid = HjbGrid::default_for(&p);
    let (reports, slope) = hjb_convergence(&model, &grid, &[4e-3, 2e-3, 1e-3]).unwrap();
    let fine = reports.last().unwrap().max_abs_residual;
    let elapsed = start.elapsed();
    let (lo, hi) = HJB_SLOPE_RANGE;
    verdict(
        fine < PDE_TOLERANCE && (lo..=hi).contains(&slope) && within_budget(elapsed, 5.0),
        format!("residual {fine:.3e} at h=1e-3, log-log slope {slope:.3}, {elapsed:.2?}"),
    )
}

fn known_drift() -> Verdict {
    let p = ModelParams::default();
    let report = limit_check_known_drift(&p, 1e-10, &LimitGrid::default_for(&p)).unwrap();
    let spot = ClosedForm::new(p.with_prior_var(1e-10))
        .unwrap()
        .optimal_policy(0.0, 0.0, 1.0)
        .unwrap()
        .variance;
    verdict(
        report.passed && (spot - 33.9785).abs() < 1e-4,
        format!("max error {:.3e}, variance(0, m=1) = {spot:.6}", report.max_abs_residual),
    )
}

fn deterministic() -> Verdict {
    let p = ModelParams::default();
    let report = limit_check_deterministic(&p, &[1.0, 0.1, 0.01, 0.0], &LimitGrid::default_for(&p)).unwrap();
    verdict(report.passed, format!("max deviation {:.3e}", report.max_abs_residual))
}

fn conviction() -> Verdict {
    let p = ModelParams::default();
    let model = ClosedForm::new(p).unwrap();
    let ts = linspace(0.0, p.horizon, 101);
    let ms = symmetric_grid(2.0, 121);
    let check = conviction_check(&model, &ts, &ms).unwrap();
    let terminal = ms
        .iter()
        .map(|&m| (model.optimal_policy(p.horizon, 0.0, m).unwrap().variance - 12.5).abs())
        .fold(0.0, f64::max);
    verdict(
        check.report.passed && check.symmetric && check.minimized_at_zero && check.strictly_monotone
            && check.terminal_collapse && terminal < 1e-12,
        format!(
            "derivative identity {:.3e}, symmetric {}, min at 0 {}, monotone {}, terminal {:.1e} from 12.5",
            check.report.max_abs_residual, check.symmetric, check.minimized_at_zero, check.strictly_monotone, terminal
        ),
    )
}

fn objective() -> Verdict {
    let start = Instant::now();
    let p = ModelParams::default();
    let v0 = ClosedForm::new(p).unwrap().value(0.0, 0.0, 0.0).unwrap();
    let base = SimulationSpec::new(0.0, 100_000, 200, 2024);
    let inn = simulate(&p, &base).unwrap();
    let phy = simulate(&p, &SimulationSpec { seed: 2025, ..base }.mode(SimulationMode::Physical)).unwrap();
    let (ei, si) = estimate_objective(&inn).unwrap();
    let (ep, sp) = estimate_objective(&phy).unwrap();
    let z = (ei - v0) / si;
    let zm = (ei - ep) / (si * si + sp * sp).sqrt();
    let elapsed = start.elapsed();
    verdict(
        z.abs() < 3.0 && zm.abs() < 3.0 && inn.quarantined + phy.quarantined == 0 && within_budget(elapsed, 60.0),
        format!("estimate {ei:.5} +- {si:.5} vs {v0:.5} (z {z:.2}), mode z {zm:.2}, {elapsed:.2?}"),
    )
}

fn martingale() -> Verdict {
    let p = ModelParams::default();
    let spec = SimulationSpec::new(0.0, 100_000, 200, 2024);
    let pts = martingale_diagnostic(&p, &spec, &[0.5 * p.horizon, p.horizon]).unwrap();
    let optimal_ok = pts.iter().all(|pt| pt.z_score().abs() < 3.0);
    let perturbed = SimulationSpec::new(0.0, 500_000, 200, 2026).mean_scale(1.5);
    let bad = martingale_diagnostic(&p, &perturbed, &[p.horizon]).unwrap()[0];
    let excess = (bad.mean - bad.target) / bad.stderr;
    verdict(
        optimal_ok && excess > 3.0,
        format!(
            "optimal z at T/2, T: {:.2}, {:.2}; perturbed excess {excess:.2} stderr",
            pts[0].z_score(),
            pts[1].z_score()
        ),
    )
}

fn filter() -> Verdict {
    let p = ModelParams::default();
    let m = filter_marginals(&p, DriftMode::PriorSampled, 100_000, 200, 2024, &[200]).unwrap();
    let (var, vse) = variance_stderr(&m[0]);
    let (mean, mse) = mean_stderr(&m[0]);
    let zv = (var - 0.5) / vse;
    let zm = (mean - p.prior_mean) / mse;
    verdict(
        zv.abs() < 3.0 && zm.abs() < 3.0,
        format!("Var(m_T) {var:.5} (z {zv:.2}), E[m_T] {mean:.5} (z {zm:.2})"),
    )
}

fn foc() -> Verdict {
    let p = ModelParams::default();
    let model = ClosedForm::new(p).unwrap();
    let states = sample_states(&p, 20, 7);
    let check = gaussian_foc_check(&model, &states, 4000).unwrap();
    let converged = check.outcomes.iter().filter(|o| o.converged).count();
    verdict(
        check.report.passed && converged == 20,
        format!(
            "max relative error {:.3e}, {converged}/20 converged",
            check.report.max_abs_residual
        ),
    )
}

fn run_cli(dir: &Path) {
    let out = dir.display().to_string();
    let small = ["--n-paths", "5000", "--n-steps", "100"];
    for cmd in ["paths", "heatmap", "simulate", "frontier", "verify"] {
        let mut args = vec!["mvbayes", cmd, "--out", &out, "--seed", "7"];
        if cmd == "simulate" || cmd == "frontier" {
            args.extend(small);
        }
        mvbayes::cli::run(args);
    }
}

fn determinism() -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_cli(a.path());
    run_cli(b.path());
    let files = [
        "paths.csv",
        "heatmap.csv",
        "objective.csv",
        "martingale.csv",
        "frontier.csv",
        "verify.csv",
    ];
    let mut identical = 0;
    for f in files {
        match (fs::read(a.path().join(f)), fs::read(b.path().join(f))) {
            (Ok(x), Ok(y)) if x == y && !x.is_empty() => identical += 1,
            _ => {}
        }
    }
    verdict(
        identical == files.len(),
        format!("{identical}/{} CSVs byte-identical", files.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("riccati and entropy ODE residuals", riccati),
        ("HJB residual and convergence order", hjb),
        ("known-drift limit", known_drift),
        ("deterministic limit", deterministic),
        ("conviction structure", conviction),
        ("Monte Carlo objective and mode agreement", objective),
        ("martingale and perturbed policy", martingale),
        ("filter statistics", filter),
        ("Gaussian first-order condition", foc),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2}. {name}: {}", i + 1, v.detail);
        if !v.passed {
            failed += 1;
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
