//! Small sample-statistics helpers shared by the simulation checks.

/// Sample mean and standard error (`sd / sqrt(n)`, zero for `n = 1`).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    // shifted sum: exact when every sample is identical
    let first = xs[0];
    let mean = first + xs.iter().map(|x| x - first).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = sample_variance_about(xs, mean);
    (mean, (var / n as f64).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    sample_variance_about(xs, mean)
}

fn sample_variance_about(xs: &[f64], mean: f64) -> f64 {
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample variance with the standard error of the variance estimator,
/// `sqrt((mu4 - s^4 (n-3)/(n-1)) / n)`.
pub fn variance_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = sample_variance_about(xs, mean);
    let mu4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let se = ((mu4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt();
    (var, se)
}

/// z-score of `estimate - target`; zero when both the difference and the
/// standard error vanish.
pub fn z_score(estimate: f64, target: f64, stderr: f64) -> f64 {
    let diff = estimate - target;
    if stderr == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / stderr
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_has_zero_stderr() {
        assert_eq!(mean_stderr(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn known_values() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(z_score(1.0, 1.0, 0.0), 0.0);
        assert!(z_score(2.0, 1.0, 0.0).is_infinite());
    }

    #[test]
    fn ks_bounds() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(ks_statistic(&a, &a), 0.0);
        let b: Vec<f64> = (200..300).map(f64::from).collect();
        assert_eq!(ks_statistic(&a, &b), 1.0);
    }
}
