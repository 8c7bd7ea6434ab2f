/// Composite Simpson rule on `[a, b]` with `n` intervals (`n` rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    if a == b {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let x = a + h * i as f64;
        if i % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even)
}

/// [`simpson`] for two integrands sharing the same nodes.
pub fn simpson_pair<F: Fn(f64) -> (f64, f64)>(f: F, a: f64, b: f64, n: usize) -> (f64, f64) {
    let n = (n.max(2) + 1) & !1;
    if a == b {
        return (0.0, 0.0);
    }
    let h = (b - a) / n as f64;
    let (mut odd, mut even) = ((0.0, 0.0), (0.0, 0.0));
    for i in 1..n {
        let (u, v) = f(a + h * i as f64);
        if i % 2 == 1 {
            odd.0 += u;
            odd.1 += v;
        } else {
            even.0 += u;
            even.1 += v;
        }
    }
    let (fa, fb) = (f(a), f(b));
    (
        h / 3.0 * (fa.0 + fb.0 + 4.0 * odd.0 + 2.0 * even.0),
        h / 3.0 * (fa.1 + fb.1 + 4.0 * odd.1 + 2.0 * even.1),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 2);
        assert!((v - (15.0 / 4.0 - 3.0 + 3.0)).abs() < 1e-13);
    }

    #[test]
    fn fourth_order() {
        let exact = 1.0 - (-1.0f64).exp();
        let e1 = (simpson(|x| (-x).exp(), 0.0, 1.0, 8) - exact).abs();
        let e2 = (simpson(|x| (-x).exp(), 0.0, 1.0, 16) - exact).abs();
        assert!((e1 / e2 - 16.0).abs() < 0.5);
    }

    #[test]
    fn pair_matches_two_scalar_passes() {
        let (u, v) = simpson_pair(|x| (x.sin(), x.exp()), 0.3, 1.7, 64);
        assert_eq!(u, simpson(f64::sin, 0.3, 1.7, 64));
        assert_eq!(v, simpson(f64::exp, 0.3, 1.7, 64));
    }

    #[test]
    fn odd_interval_count_is_rounded_up() {
        let v = simpson(|x| x * x, 0.0, 3.0, 3);
        assert!((v - 9.0).abs() < 1e-12);
    }
}
