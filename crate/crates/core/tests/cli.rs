use std::fs;
use std::path::Path;

use mvbayes::cli::{run, EXIT_FAILED, EXIT_IO, EXIT_OK};

fn mvbayes(cmd: &str, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["mvbayes".to_string(), cmd.into(), "--out".into(), out.display().to_string()];
    args.extend(extra.iter().map(|s| s.to_string()));
    run(args)
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn paths_default_shape_and_terminal_variance() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mvbayes("paths", dir.path(), &[]), EXIT_OK);
    let text = fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("path_id,t,m,policy_variance"));
    let data = rows(&dir.path().join("paths.csv"));
    assert_eq!(data.len(), 5 * 201);
    for r in data.iter().filter(|r| r[1] == 1.0) {
        assert!((r[3] - 12.5).abs() < 1e-12, "{r:?}");
    }
    assert_eq!(data.iter().filter(|r| r[1] == 1.0).count(), 5);
}

#[test]
fn paths_without_prior_uncertainty_stay_put() {
    let dir = tempfile::tempdir().unwrap();
    let code = mvbayes("paths", dir.path(), &["--prior-var", "0", "--prior-mean", "-0.25"]);
    assert_eq!(code, EXIT_OK);
    assert!(rows(&dir.path().join("paths.csv")).iter().all(|r| r[2] == -0.25));
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let flags = ["--seed", "99", "--n-paths", "2000", "--n-steps", "50"];
    for cmd in ["paths", "simulate", "frontier"] {
        mvbayes(cmd, a.path(), &flags);
        mvbayes(cmd, b.path(), &flags);
    }
    for file in ["paths.csv", "objective.csv", "martingale.csv", "frontier.csv"] {
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
}

#[test]
fn heatmap_shape() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mvbayes("heatmap", dir.path(), &[]), EXIT_OK);
    let data = rows(&dir.path().join("heatmap.csv"));
    assert_eq!(data.len(), 101 * 121);
    let max = data.iter().map(|r| r[2]).fold(f64::MIN, f64::max);
    for row in data.chunks(121) {
        let t = row[0][0];
        let v: Vec<f64> = row.iter().map(|r| r[2]).collect();
        for i in 0..121 {
            assert_eq!(v[i], v[120 - i]);
        }
        if t < 1.0 {
            assert!(v.iter().all(|&x| x >= v[60]));
        } else {
            assert!(v.iter().all(|&x| x == v[0]));
        }
    }
    // largest at full conviction and early in the horizon
    let top = data.iter().find(|r| r[2] == max).unwrap();
    assert_eq!(top[1].abs(), 2.0);
    assert!(top[0] <= 0.1, "{top:?}");
}

#[test]
fn simulate_writes_objective_and_martingale() {
    let dir = tempfile::tempdir().unwrap();
    let code = mvbayes("simulate", dir.path(), &["--n-paths", "20000", "--mode", "both"]);
    assert_eq!(code, EXIT_OK);
    let obj = rows(&dir.path().join("objective.csv"));
    assert_eq!(obj.len(), 1);
    assert!(obj[0][3].abs() < 3.0);
    assert_eq!(rows(&dir.path().join("martingale.csv")).len(), 2);
    assert_eq!(rows(&dir.path().join("mode_agreement.csv")).len(), 1);
}

#[test]
fn simulate_deterministic_absorbing_run_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let flags = ["--tau", "0", "--prior-var", "0", "--prior-mean", "0.5", "--x0", "1", "--target-w", "1", "--n-paths", "100"];
    assert_eq!(mvbayes("simulate", dir.path(), &flags), EXIT_OK);
    let obj = rows(&dir.path().join("objective.csv"));
    assert_eq!(obj[0][0], 0.0);
}

#[test]
fn verify_default_passes_and_fault_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mvbayes("verify", dir.path(), &[]), EXIT_OK);
    let text = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert!(text.starts_with("name,grid_size,max_abs_residual,tolerance,passed\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));

    assert_eq!(mvbayes("verify", dir.path(), &["--inject-alpha-fault", "1e-3"]), EXIT_FAILED);
    let text = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    let alpha = text.lines().find(|l| l.starts_with("riccati_alpha,")).unwrap();
    assert!(alpha.ends_with(",false"));
}

#[test]
fn config_file_and_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"n_paths": 3, "n_steps": 20}"#).unwrap();
    let code = mvbayes("paths", dir.path(), &["--config", cfg.to_str().unwrap(), "--n-steps", "10"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(rows(&dir.path().join("paths.csv")).len(), 3 * 11);

    fs::write(&cfg, r#"{"n_pathz": 3}"#).unwrap();
    assert_eq!(mvbayes("paths", dir.path(), &["--config", cfg.to_str().unwrap()]), EXIT_IO);

    let blocker = dir.path().join("not_a_dir");
    fs::write(&blocker, "x").unwrap();
    assert_eq!(mvbayes("paths", &blocker.join("sub"), &[]), EXIT_IO);
}
