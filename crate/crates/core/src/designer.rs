//! Closed-form least-squares design of the branch filters `h_n(k)`.
//!
//! Branch `n` minimizes
//!
//! ```text
//! P_n = 1/2π ∫_{ω1}^{ω2} |A_n(θ) - 1|² dθ + 1/2π ∫_{-ω2}^{-ω1} |A_n(θ)|² dθ
//! A_n(θ) = Σ_k h_n(k) exp(-jθ(k - d_{n-k}))
//! ```
//!
//! which is the quadratic form `hᴴSh - 2Re(cᴴh) + (ω2-ω1)/2π` with a real
//! symmetric Gram matrix `S` and complex vector `c`. The minimizer solves
//! `S h = c`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use twofloat::consts::FRAC_1_PI;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::model::{BandSpec, FilterBank, SamplingPattern};

/// Offsets `x` or `y` below this magnitude take the limiting (zero-offset) value.
pub const ZERO_OFFSET_TOL: f64 = 1e-12;

/// Systems whose reciprocal condition number falls below this are treated as
/// singular in double precision.
pub const MIN_RCOND: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub pattern: SamplingPattern,
    pub band: BandSpec,
    /// Even filter order `N`.
    pub order: usize,
    /// Tikhonov term added to the diagonal of `S`.
    pub ridge: f64,
}

impl DesignProblem {
    pub fn new(pattern: SamplingPattern, band: BandSpec, order: usize) -> Result<Self> {
        Self::with_ridge(pattern, band, order, 0.0)
    }

    pub fn with_ridge(
        pattern: SamplingPattern,
        band: BandSpec,
        order: usize,
        ridge: f64,
    ) -> Result<Self> {
        let band = band.checked()?;
        if order == 0 || !order.is_multiple_of(2) {
            return Err(Error::InvalidProblem(format!(
                "filter order N = {order} must be even and positive"
            )));
        }
        if !(ridge.is_finite() && ridge >= 0.0) {
            return Err(Error::InvalidProblem(format!(
                "ridge = {ridge} must be finite and non-negative"
            )));
        }
        Ok(DesignProblem {
            pattern,
            band,
            order,
            ridge,
        })
    }

    pub fn half_order(&self) -> i64 {
        (self.order / 2) as i64
    }

    /// Tap indices `k = -N/2..=N/2`.
    pub fn taps(&self) -> impl Iterator<Item = i64> + Clone {
        let h = self.half_order();
        -h..=h
    }

    /// Effective sampling instants `k - d_{n-k}` seen by each tap of branch `n`.
    pub fn offsets(&self, branch: usize) -> Vec<f64> {
        tap_offsets(&self.pattern, branch, self.half_order())
    }

    fn check_branch(&self, branch: usize) -> Result<()> {
        if branch >= self.pattern.period() {
            return Err(Error::InvalidProblem(format!(
                "branch {branch} out of range for M = {}",
                self.pattern.period()
            )));
        }
        Ok(())
    }

    /// `(ω2 - ω1)/2π`, the error of the all-zero filter.
    pub fn const_term(&self) -> f64 {
        self.band.b_t1 / (2.0 * PI)
    }
}

pub(crate) fn tap_offsets(pattern: &SamplingPattern, branch: usize, half: i64) -> Vec<f64> {
    let n = branch as i64;
    (-half..=half)
        .map(|k| k as f64 - pattern.skew_at(n - k))
        .collect()
}

/// Normal equations of one branch.
#[derive(Debug, Clone)]
pub struct GramSystem {
    pub branch: usize,
    pub band: BandSpec,
    pub offsets: Vec<f64>,
    pub s: DMatrix<f64>,
    pub c: DVector<Complex64>,
    pub const_term: f64,
}

/// `c_{n,k} = 1/2π ∫_{ω1}^{ω2} exp(jθx) dθ` with `x = k - d_{n-k}`.
pub fn build_c(problem: &DesignProblem, branch: usize) -> Result<DVector<Complex64>> {
    problem.band.checked()?;
    problem.check_branch(branch)?;
    let band = &problem.band;
    let x = problem.offsets(branch);
    Ok(DVector::from_iterator(
        x.len(),
        x.iter().map(|&x| c_entry(band, x)),
    ))
}

/// `s_{n,kp} = 1/π ∫_{ω1}^{ω2} cos(θy) dθ` with `y = (k - d_{n-k}) - (p - d_{n-p})`.
pub fn build_s(problem: &DesignProblem, branch: usize) -> Result<DMatrix<f64>> {
    problem.band.checked()?;
    problem.check_branch(branch)?;
    let x = problem.offsets(branch);
    let dim = x.len();
    let mut s = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = s_entry(&problem.band, x[i] - x[j]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

pub fn gram_system(problem: &DesignProblem, branch: usize) -> Result<GramSystem> {
    Ok(GramSystem {
        branch,
        band: problem.band,
        offsets: problem.offsets(branch),
        s: build_s(problem, branch)?,
        c: build_c(problem, branch)?,
        const_term: problem.const_term(),
    })
}

// The edge-difference forms are rewritten as products around the center:
//   e^{jω2x} - e^{jω1x} = 2j e^{jωc x} sin(Bx/2)
//   sin(ω2y) - sin(ω1y) = 2 cos(ωc y) sin(By/2)
// which stay accurate for offsets close to zero.
fn c_entry(band: &BandSpec, x: f64) -> Complex64 {
    if x.abs() < ZERO_OFFSET_TOL {
        return Complex64::new(band.b_t1 / (2.0 * PI), 0.0);
    }
    let mag = (0.5 * band.b_t1 * x).sin() / (PI * x);
    Complex64::from_polar(1.0, band.omega_c_t1 * x) * mag
}

fn s_entry(band: &BandSpec, y: f64) -> f64 {
    if y.abs() < ZERO_OFFSET_TOL {
        return band.b_t1 / PI;
    }
    2.0 * (band.omega_c_t1 * y).cos() * (0.5 * band.b_t1 * y).sin() / (PI * y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `λmax/λmin` of `S` (without ridge).
    pub condition: f64,
    /// `‖S h - c‖∞` with the unregularized `S`.
    pub residual_inf: f64,
    /// `‖c‖∞`, for scaling the residual.
    pub c_inf: f64,
    /// `P_n` at the returned coefficients (quadratic form).
    pub error_p: f64,
    pub ridge: f64,
}

#[derive(Debug, Clone)]
pub struct BranchDesign {
    pub branch: usize,
    /// Coefficients `h_n(k)` for `k = -N/2..=N/2`.
    pub taps: Vec<Complex64>,
    pub diagnostics: Diagnostics,
}

/// Solves `(S + ridge·I) h = c` for branch `n` by Cholesky factorization.
pub fn design_filter(problem: &DesignProblem, branch: usize) -> Result<BranchDesign> {
    let gram = gram_system(problem, branch)?;
    solve_gram(&gram, problem.ridge)
}

pub fn solve_gram(gram: &GramSystem, ridge: f64) -> Result<BranchDesign> {
    let branch = gram.branch;
    let dim = gram.s.nrows();

    let eig = gram.s.clone().symmetric_eigen();
    let lmin = eig.eigenvalues.min();
    let lmax = eig.eigenvalues.max();
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };

    let rcond = (lmin + ridge) / (lmax + ridge);
    if rcond.is_nan() || rcond < MIN_RCOND {
        return Err(Error::SingularSystem {
            branch,
            reason: format!(
                "S + ridge·I is numerically singular (reciprocal condition {rcond:.3e}, \
                 ridge {ridge:e}); increase the ridge or change order/band/skews"
            ),
        });
    }

    let mut a = gram.s.clone();
    for i in 0..dim {
        a[(i, i)] += ridge;
    }
    let chol = a.cholesky().ok_or_else(|| Error::SingularSystem {
        branch,
        reason: "Cholesky factorization of S + ridge·I failed (not positive definite)".into(),
    })?;

    let re = chol.solve(&gram.c.map(|z| z.re));
    let im = chol.solve(&gram.c.map(|z| z.im));
    let h = DVector::from_iterator(
        dim,
        re.iter().zip(im.iter()).map(|(&r, &i)| Complex64::new(r, i)),
    );

    let sh = gram.s.map(|x| Complex64::new(x, 0.0)) * &h;
    let residual_inf = inf_norm(&(sh - &gram.c));
    let c_inf = inf_norm(&gram.c);
    let error_p = quadratic_form(h.as_slice(), &gram.band, &gram.offsets);

    Ok(BranchDesign {
        branch,
        taps: h.iter().copied().collect(),
        diagnostics: Diagnostics {
            condition,
            residual_inf,
            c_inf,
            error_p,
            ridge,
        },
    })
}

/// Branches that feed retained outputs: even branches for even `M`, all for odd `M`.
pub fn required_branches(m: usize) -> Vec<usize> {
    if m.is_multiple_of(2) {
        (0..m).step_by(2).collect()
    } else {
        (0..m).collect()
    }
}

/// Designs every branch the reconstructor needs. For even `M` only the even
/// rows are designed and the bank is flagged as a subset.
pub fn design_bank(problem: &DesignProblem) -> Result<FilterBank> {
    design_bank_report(problem).map(|(bank, _)| bank)
}

/// [`design_bank`] plus the per-branch designs and diagnostics.
pub fn design_bank_report(problem: &DesignProblem) -> Result<(FilterBank, Vec<BranchDesign>)> {
    let m = problem.pattern.period();
    let branches = required_branches(m);
    let designs = design_branches(problem, &branches)?;
    let mut rows = vec![None; m];
    for d in &designs {
        rows[d.branch] = Some(d.taps.clone());
    }
    let bank = FilterBank::new(
        problem.pattern.clone(),
        problem.band,
        problem.order,
        rows,
        m.is_multiple_of(2),
    )?;
    Ok((bank, designs))
}

/// All `M` rows, including the odd rows an even-`M` reconstructor discards.
pub fn design_full_bank(problem: &DesignProblem) -> Result<FilterBank> {
    let m = problem.pattern.period();
    let branches: Vec<usize> = (0..m).collect();
    let designs = design_branches(problem, &branches)?;
    let rows = designs.into_iter().map(|d| Some(d.taps)).collect();
    FilterBank::new(problem.pattern.clone(), problem.band, problem.order, rows, false)
}

fn design_branches(problem: &DesignProblem, branches: &[usize]) -> Result<Vec<BranchDesign>> {
    branches
        .par_iter()
        .map(|&n| design_filter(problem, n))
        .collect()
}

/// `A_n(θ) = Σ_k h_n(k) exp(-jθ(k - d_{n-k}))` on a grid of `θ = ω·T1` values.
pub fn freq_response(
    taps: &[Complex64],
    pattern: &SamplingPattern,
    branch: usize,
    omega_t1: &[f64],
) -> Vec<Complex64> {
    let half = (taps.len() / 2) as i64;
    let x = tap_offsets(pattern, branch, half);
    omega_t1
        .iter()
        .map(|&w| response_at(taps, &x, w))
        .collect()
}

#[inline]
fn response_at(taps: &[Complex64], offsets: &[f64], w: f64) -> Complex64 {
    taps.iter()
        .zip(offsets)
        .map(|(h, &x)| h * Complex64::from_polar(1.0, -w * x))
        .sum()
}

/// `A_n(θ)` and `dA_n/dθ`.
fn response_and_slope(taps: &[Complex64], offsets: &[f64], w: f64) -> (Complex64, Complex64) {
    let mut a = Complex64::new(0.0, 0.0);
    let mut da = Complex64::new(0.0, 0.0);
    for (h, &x) in taps.iter().zip(offsets) {
        let t = h * Complex64::from_polar(1.0, -w * x);
        a += t;
        da += t * Complex64::new(0.0, -x);
    }
    (a, da)
}

/// How [`error_p`] evaluates the error functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorMethod {
    /// `hᴴSh - 2Re(cᴴh) + const_term`.
    QuadraticForm,
    /// Trapezoid rule with `points` nodes per band, including the
    /// Euler-Maclaurin end correction (exact derivatives of `|A - t|²`).
    Quadrature { points: usize },
}

pub fn error_p(
    taps: &[Complex64],
    problem: &DesignProblem,
    branch: usize,
    method: ErrorMethod,
) -> Result<f64> {
    if taps.len() != problem.order + 1 {
        return Err(Error::InvalidProblem(format!(
            "expected {} taps, got {}",
            problem.order + 1,
            taps.len()
        )));
    }
    match method {
        ErrorMethod::QuadraticForm => {
            problem.band.checked()?;
            problem.check_branch(branch)?;
            Ok(quadratic_form(taps, &problem.band, &problem.offsets(branch)))
        }
        ErrorMethod::Quadrature { points } => {
            problem.check_branch(branch)?;
            if points < 2 {
                return Err(Error::InvalidProblem("quadrature needs at least 2 points".into()));
            }
            let x = problem.offsets(branch);
            let (w1, w2) = (problem.band.omega1_t1(), problem.band.omega2_t1());
            let pass = band_integral(taps, &x, w1, w2, 1.0, points);
            let stop = band_integral(taps, &x, -w2, -w1, 0.0, points);
            Ok((pass + stop) / (2.0 * PI))
        }
    }
}

fn inf_norm(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `hᴴSh - 2Re(cᴴh) + B/2π` with `S`, `c` and the sums in double-double
/// arithmetic. Near the optimum the three terms cancel to many digits, so
/// plain `f64` loses most of the significance once `P_n` drops below ~1e-8.
fn quadratic_form(h: &[Complex64], band: &BandSpec, offsets: &[f64]) -> f64 {
    let wc = TwoFloat::from(band.omega_c_t1);
    let half_b = TwoFloat::from(band.b_t1) * 0.5;
    let zero = TwoFloat::from(0.0);

    let dot = |a: Complex64, b: Complex64| TwoFloat::new_mul(a.re, b.re) + TwoFloat::new_mul(a.im, b.im);

    let mut hsh = zero;
    for (i, (&xi, &hi)) in offsets.iter().zip(h).enumerate() {
        hsh += dot(hi, hi) * half_b * 2.0 * FRAC_1_PI;
        for (&xj, &hj) in offsets[i + 1..].iter().zip(&h[i + 1..]) {
            let y = TwoFloat::new_sub(xi, xj);
            let s = if y.abs() < ZERO_OFFSET_TOL {
                half_b * 2.0 * FRAC_1_PI
            } else {
                dd_div((wc * y).cos() * (half_b * y).sin() * 2.0 * FRAC_1_PI, y)
            };
            hsh += dot(hi, hj) * s * 2.0;
        }
    }

    let mut ch = zero;
    for (&x, &hk) in offsets.iter().zip(h) {
        let x = TwoFloat::from(x);
        let (re, im, mag) = if x.abs() < ZERO_OFFSET_TOL {
            (TwoFloat::from(1.0), zero, half_b * FRAC_1_PI)
        } else {
            let (s, c) = (wc * x).sin_cos();
            (c, s, dd_div((half_b * x).sin() * FRAC_1_PI, x))
        };
        ch += (re * hk.re + im * hk.im) * mag;
    }

    f64::from(hsh - ch * 2.0 + half_b * FRAC_1_PI)
}

/// `a / b` with one correction step; the division in `twofloat` is only
/// accurate to `f64` precision.
fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r2 = r - b * q2;
    TwoFloat::new_add(q1, q2) + r2.hi() / b.hi()
}

/// `∫_a^b |A(θ) - target|² dθ`.
fn band_integral(
    taps: &[Complex64],
    offsets: &[f64],
    a: f64,
    b: f64,
    target: f64,
    points: usize,
) -> f64 {
    let step = (b - a) / (points - 1) as f64;
    let f = |w: f64| (response_at(taps, offsets, w) - target).norm_sqr();
    let df = |w: f64| {
        let (r, dr) = response_and_slope(taps, offsets, w);
        2.0 * ((r - target).conj() * dr).re
    };
    let interior: f64 = (1..points - 1).map(|i| f(a + i as f64 * step)).sum();
    let trap = step * (0.5 * (f(a) + f(b)) + interior);
    trap - step * step / 12.0 * (df(b) - df(a))
}

/// One row of the magnitude/phase table written by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponsePoint {
    pub omega_over_pi: f64,
    pub mag_db: f64,
    pub phase_rad: f64,
}

/// `|A_n|` in dB and `arg A_n` on an equispaced grid of `points` values of
/// `θ/π` in `[from_over_pi, to_over_pi]`.
pub fn response_table(
    taps: &[Complex64],
    pattern: &SamplingPattern,
    branch: usize,
    from_over_pi: f64,
    to_over_pi: f64,
    points: usize,
) -> Vec<ResponsePoint> {
    let step = if points > 1 {
        (to_over_pi - from_over_pi) / (points - 1) as f64
    } else {
        0.0
    };
    let grid: Vec<f64> = (0..points)
        .map(|i| (from_over_pi + i as f64 * step) * PI)
        .collect();
    freq_response(taps, pattern, branch, &grid)
        .into_iter()
        .zip(&grid)
        .map(|(a, &w)| ResponsePoint {
            omega_over_pi: w / PI,
            mag_db: 20.0 * a.norm().max(1e-20).log10(),
            phase_rad: a.arg(),
        })
        .collect()
}
