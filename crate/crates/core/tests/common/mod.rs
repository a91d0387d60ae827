//! Reference computations that do not share code with the designer.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use nusrec_core::{BandSpec, SamplingPattern};

/// Trapezoid rule on `points` nodes with the first Euler-Maclaurin end
/// correction, given the integrand and its derivative.
pub fn trapezoid<T, F, D>(a: f64, b: f64, points: usize, f: F, df: D) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(f64) -> T,
    D: Fn(f64) -> T,
{
    let h = (b - a) / (points - 1) as f64;
    let mut acc = (f(a) + f(b)) * 0.5;
    for i in 1..points - 1 {
        acc = acc + f(a + i as f64 * h);
    }
    acc * h - (df(b) - df(a)) * (h * h / 12.0)
}

/// `x_k = k - d_{n-k}` for `k = -N/2..=N/2`.
pub fn offsets(pattern: &SamplingPattern, branch: usize, order: usize) -> Vec<f64> {
    let m = pattern.period() as i64;
    let d = pattern.skews();
    let half = (order / 2) as i64;
    (-half..=half)
        .map(|k| k as f64 - d[(branch as i64 - k).rem_euclid(m) as usize])
        .collect()
}

/// `1/2π ∫_{ω1}^{ω2} exp(jθx) dθ` by quadrature.
pub fn quad_c(band: &BandSpec, x: f64, points: usize) -> Complex64 {
    let (a, b) = (band.omega1_t1(), band.omega2_t1());
    let v = trapezoid(
        a,
        b,
        points,
        |t| Complex64::from_polar(1.0, t * x),
        |t| Complex64::new(0.0, x) * Complex64::from_polar(1.0, t * x),
    );
    v / (2.0 * PI)
}

/// `1/π ∫_{ω1}^{ω2} cos(θy) dθ` by quadrature.
pub fn quad_s(band: &BandSpec, y: f64, points: usize) -> f64 {
    let (a, b) = (band.omega1_t1(), band.omega2_t1());
    trapezoid(a, b, points, |t| (t * y).cos(), |t| -y * (t * y).sin()) / PI
}

/// Composite Boole weights on `4q + 1` equispaced nodes over `[a, b]`.
fn boole(a: f64, b: f64, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(nodes % 4 == 1 && nodes >= 5);
    let h = (b - a) / (nodes - 1) as f64;
    let mut w = vec![0.0; nodes];
    for p in (0..nodes - 1).step_by(4) {
        for (j, c) in [7.0, 32.0, 12.0, 32.0, 7.0].iter().enumerate() {
            w[p + j] += c * 2.0 * h / 45.0;
        }
    }
    let t = (0..nodes).map(|i| a + i as f64 * h).collect();
    (t, w)
}

/// Discrete weighted least-squares fit of `A(θ) = Σ h_k e^{-jθx_k}` to 1 on
/// the band and 0 on its mirror, solved from the complex normal equations
/// with an LU factorization.
pub fn dense_ls(
    pattern: &SamplingPattern,
    band: &BandSpec,
    order: usize,
    branch: usize,
    nodes_per_band: usize,
) -> Vec<Complex64> {
    let x = offsets(pattern, branch, order);
    let dim = x.len();
    let (w1, w2) = (band.omega1_t1(), band.omega2_t1());
    let (tp, wp) = boole(w1, w2, nodes_per_band);
    let (ts, ws) = boole(-w2, -w1, nodes_per_band);

    let mut gram = DMatrix::<Complex64>::zeros(dim, dim);
    let mut rhs = DVector::<Complex64>::zeros(dim);
    let mut row = vec![Complex64::new(0.0, 0.0); dim];
    for (grid, weights, target) in [(&tp, &wp, 1.0), (&ts, &ws, 0.0)] {
        for (&t, &w) in grid.iter().zip(weights.iter()) {
            for (r, &xk) in row.iter_mut().zip(&x) {
                *r = Complex64::from_polar(1.0, -t * xk);
            }
            let w = w / (2.0 * PI);
            for i in 0..dim {
                let ci = row[i].conj() * w;
                rhs[i] += ci * target;
                for j in 0..dim {
                    gram[(i, j)] += ci * row[j];
                }
            }
        }
    }
    let h = gram.lu().solve(&rhs).expect("oracle normal equations are singular");
    h.iter().copied().collect()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Deterministic xorshift stream for test inputs.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}
