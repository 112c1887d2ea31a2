//! Complex spherical harmonics.
//!
//! Convention: orthonormal on the unit sphere with the Condon–Shortley
//! phase, `Y_n^{-m} = (-1)^m conj(Y_n^m)`. Coefficients are laid out in
//! ACN order, flat index `n² + n + m`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::geometry::Direction;

/// Maximum spherical-harmonic degree `N` of an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShOrder(usize);

impl ShOrder {
    pub const fn new(order: usize) -> Self {
        Self(order)
    }

    pub const fn get(self) -> usize {
        self.0
    }

    /// `(N + 1)²`
    pub const fn channels(self) -> usize {
        (self.0 + 1) * (self.0 + 1)
    }

    /// Flat index of degree `n`, order `m`. Panics when `(n, m)` is outside
    /// the analysis.
    pub fn index(self, n: usize, m: i64) -> usize {
        assert!(n <= self.0 && m.unsigned_abs() as usize <= n, "({n}, {m}) out of range");
        ((n * n + n) as i64 + m) as usize
    }

    /// Inverse of [`ShOrder::index`].
    pub fn degree_order(self, index: usize) -> (usize, i64) {
        let n = (index as f64).sqrt() as usize;
        // guard against sqrt rounding
        let n = if (n + 1) * (n + 1) <= index { n + 1 } else { n };
        let m = index as i64 - (n * n + n) as i64;
        (n, m)
    }

    /// `(n, m)` pairs in flat-index order.
    pub fn iter(self) -> impl Iterator<Item = (usize, i64)> {
        (0..=self.0).flat_map(|n| (-(n as i64)..=n as i64).map(move |m| (n, m)))
    }
}

/// All `Y_n^m(θ, φ)` for `n ≤ order`, in flat-index order.
pub fn sh_values(direction: &Direction, order: ShOrder) -> Vec<Complex64> {
    let theta = direction.inclination().to_radians();
    let phi = direction.azimuth().to_radians();
    let (sin_t, cos_t) = theta.sin_cos();
    let big_n = order.get();
    let legendre = associated_legendre(big_n, cos_t, sin_t);

    let mut out = vec![Complex64::new(0.0, 0.0); order.channels()];
    for n in 0..=big_n {
        for m in 0..=n {
            let norm = ((2 * n + 1) as f64 / (4.0 * PI) * factorial_ratio(n - m, n + m)).sqrt();
            let y = Complex64::from_polar(norm * legendre[n][m], m as f64 * phi);
            out[n * n + n + m] = y;
            if m > 0 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                out[n * n + n - m] = y.conj() * sign;
            }
        }
    }
    out
}

/// Encoding matrix with entry `(q, index(n, m)) = Y_n^m(Ω_q)`.
pub fn evaluate_sh_basis(directions: &[Direction], order: ShOrder) -> DMatrix<Complex64> {
    let cols = order.channels();
    let mut y = DMatrix::zeros(directions.len(), cols);
    for (q, d) in directions.iter().enumerate() {
        for (k, v) in sh_values(d, order).into_iter().enumerate() {
            y[(q, k)] = v;
        }
    }
    y
}

/// `P_n^m(x)` for `0 ≤ m ≤ n ≤ max_n`, including the Condon–Shortley phase.
fn associated_legendre(max_n: usize, x: f64, sin_t: f64) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; max_n + 1]; max_n + 1];
    let s = sin_t.abs();
    let mut pmm = 1.0;
    for m in 0..=max_n {
        if m > 0 {
            pmm *= -((2 * m - 1) as f64) * s;
        }
        p[m][m] = pmm;
        if m < max_n {
            p[m + 1][m] = x * (2 * m + 1) as f64 * pmm;
        }
        for n in (m + 2)..=max_n {
            p[n][m] = ((2 * n - 1) as f64 * x * p[n - 1][m] - (n + m - 1) as f64 * p[n - 2][m])
                / (n - m) as f64;
        }
    }
    p
}

/// `a! / b!`
fn factorial_ratio(a: usize, b: usize) -> f64 {
    if a >= b {
        ((b + 1)..=a).map(|k| k as f64).product()
    } else {
        1.0 / ((a + 1)..=b).map(|k| k as f64).product::<f64>()
    }
}
