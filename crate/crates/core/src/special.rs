//! Spherical Bessel functions of the first and second kind.

/// Values `f_0(x) ..= f_max_n(x)` and their derivatives.
#[derive(Debug, Clone)]
pub struct BesselTable {
    pub value: Vec<f64>,
    pub derivative: Vec<f64>,
}

/// `j_n(x)` and `j_n'(x)` for `n = 0..=max_n`, `x ≥ 0`.
pub fn spherical_jn(max_n: usize, x: f64) -> BesselTable {
    let mut value = vec![0.0; max_n + 2];
    if x < (max_n as f64 + 2.0).max(2.0) {
        for (n, v) in value.iter_mut().enumerate() {
            *v = jn_series(n, x);
        }
    } else {
        // upward recurrence is stable while x exceeds the degree
        let (s, c) = x.sin_cos();
        value[0] = s / x;
        value[1] = s / (x * x) - c / x;
        for n in 1..=max_n {
            value[n + 1] = (2 * n + 1) as f64 / x * value[n] - value[n - 1];
        }
    }
    let derivative = derivatives(&value, x, max_n, jn_derivative_at_zero);
    value.truncate(max_n + 1);
    BesselTable { value, derivative }
}

/// `y_n(x)` and `y_n'(x)` for `n = 0..=max_n`, `x > 0`.
pub fn spherical_yn(max_n: usize, x: f64) -> BesselTable {
    let mut value = vec![0.0; max_n + 2];
    let (s, c) = x.sin_cos();
    value[0] = -c / x;
    value[1] = -c / (x * x) - s / x;
    for n in 1..=max_n {
        value[n + 1] = (2 * n + 1) as f64 / x * value[n] - value[n - 1];
    }
    let derivative = derivatives(&value, x, max_n, |_| f64::NEG_INFINITY);
    value.truncate(max_n + 1);
    BesselTable { value, derivative }
}

fn derivatives(value: &[f64], x: f64, max_n: usize, at_zero: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..=max_n)
        .map(|n| {
            if x == 0.0 {
                at_zero(n)
            } else if n == 0 {
                -value[1]
            } else {
                value[n - 1] - (n + 1) as f64 / x * value[n]
            }
        })
        .collect()
}

fn jn_derivative_at_zero(n: usize) -> f64 {
    if n == 1 {
        1.0 / 3.0
    } else {
        0.0
    }
}

/// Power series `x^n / (2n+1)!! · Σ_k (-x²/2)^k / (k! (2n+3)(2n+5)…(2n+2k+1))`.
fn jn_series(n: usize, x: f64) -> f64 {
    let lead = (0..n).fold(1.0, |acc, k| acc * x / (2 * k + 3) as f64);
    if lead == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let half_x2 = -0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= half_x2 / (k as f64 * (2 * n + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    lead * sum
}

/// `(2n - 1)!!`, with `(-1)!! = 1`.
pub(crate) fn double_factorial_odd(n: usize) -> f64 {
    (1..=n).map(|k| (2 * k - 1) as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn closed_forms() {
        for x in [0.3, 1.0, 2.5, 7.0, 20.0] {
            let (s, c) = f64::sin_cos(x);
            let j = spherical_jn(3, x);
            let j2 = (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
            assert!(rel(j.value[0], s / x) < 1e-13);
            assert!(rel(j.value[2], j2) < 1e-9, "x={x}");
            let y = spherical_yn(2, x);
            let y2 = (-3.0 / (x * x) + 1.0) * c / x - 3.0 * s / (x * x);
            assert!(rel(y.value[2], y2) < 1e-12);
        }
    }

    #[test]
    fn values_at_zero() {
        let j = spherical_jn(3, 0.0);
        assert_eq!(j.value, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(j.derivative[1], 1.0 / 3.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for x in [0.4, 1.7, 4.2, 9.0] {
            let h = 1e-6;
            let j = spherical_jn(3, x);
            let y = spherical_yn(3, x);
            for n in 0..=3 {
                let fd_j = (spherical_jn(3, x + h).value[n] - spherical_jn(3, x - h).value[n]) / (2.0 * h);
                let fd_y = (spherical_yn(3, x + h).value[n] - spherical_yn(3, x - h).value[n]) / (2.0 * h);
                assert!((j.derivative[n] - fd_j).abs() < 1e-7, "j'_{n}({x})");
                assert!((y.derivative[n] - fd_y).abs() < 1e-6 * fd_y.abs().max(1.0), "y'_{n}({x})");
            }
        }
    }

    #[test]
    fn wronskian() {
        for x in [0.05, 0.5, 3.0, 11.0] {
            let j = spherical_jn(4, x);
            let y = spherical_yn(4, x);
            for n in 0..=4 {
                let w = j.value[n] * y.derivative[n] - j.derivative[n] * y.value[n];
                assert!(rel(w, 1.0 / (x * x)) < 1e-9, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn series_and_recurrence_agree_at_switch() {
        // max_n = 3 switches at x = 5
        let below = spherical_jn(3, 5.0 - 1e-12);
        let above = spherical_jn(3, 5.0 + 1e-12);
        for n in 0..=3 {
            assert!(rel(below.value[n], above.value[n]) < 1e-11);
        }
    }
}
