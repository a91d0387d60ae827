//! Shared domain types: the periodic sampling grid, the band of interest,
//! designed filter banks and indexed sample buffers.
//!
//! All frequencies are normalized by the high sampling rate, i.e. they are
//! the products `ω·T1` in radians, and all time skews are fractions of `T1`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted magnitude of a time skew, in units of `T1` (exclusive).
pub const MAX_ABS_SKEW: f64 = 1.0;

/// Mathematical (non-negative) residue of `n` modulo `m`.
#[inline]
pub fn wrap_index(n: i64, m: usize) -> usize {
    n.rem_euclid(m as i64) as usize
}

/// The `M`-periodic nonuniform sampling grid `t_n = (n + d_n)·T1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PatternWire", into = "PatternWire")]
pub struct SamplingPattern {
    skews: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PatternWire {
    #[serde(rename = "M")]
    m: usize,
    skews: Vec<f64>,
}

impl TryFrom<PatternWire> for SamplingPattern {
    type Error = Error;

    fn try_from(w: PatternWire) -> Result<Self> {
        if w.m != w.skews.len() {
            return Err(Error::InvalidPattern(format!(
                "M = {} but {} skews given",
                w.m,
                w.skews.len()
            )));
        }
        SamplingPattern::new(w.skews)
    }
}

impl From<SamplingPattern> for PatternWire {
    fn from(p: SamplingPattern) -> Self {
        PatternWire {
            m: p.period(),
            skews: p.skews,
        }
    }
}

impl SamplingPattern {
    pub fn new(skews: Vec<f64>) -> Result<Self> {
        if skews.is_empty() {
            return Err(Error::InvalidPattern("period M must be at least 1".into()));
        }
        for (i, d) in skews.iter().enumerate() {
            if !d.is_finite() || d.abs() >= MAX_ABS_SKEW {
                return Err(Error::InvalidPattern(format!(
                    "skew d_{i} = {d} must be finite with |d| < {MAX_ABS_SKEW}"
                )));
            }
        }
        Ok(SamplingPattern { skews })
    }

    /// Uniform sampling with period `m` (all skews zero).
    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![0.0; m])
    }

    pub fn period(&self) -> usize {
        self.skews.len()
    }

    pub fn skews(&self) -> &[f64] {
        &self.skews
    }

    /// `d_n` for any integer `n`, using the periodic extension `d_n = d_{n+M}`.
    #[inline]
    pub fn skew_at(&self, n: i64) -> f64 {
        self.skews[wrap_index(n, self.skews.len())]
    }

    /// Same grid with the skew list rotated so that entry 0 is `d_shift`.
    pub fn rotated(&self, shift: i64) -> Self {
        let m = self.period() as i64;
        let skews = (0..m).map(|i| self.skew_at(i + shift)).collect();
        SamplingPattern { skews }
    }
}

/// Band of interest: center `ω_c·T1` and two-sided bandwidth `B·T1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    #[serde(rename = "omega_c_T1")]
    pub omega_c_t1: f64,
    #[serde(rename = "B_T1")]
    pub b_t1: f64,
}

/// One violated band invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandViolation {
    NotFinite,
    BandwidthNotPositive { b_t1: f64 },
    BandwidthNotBelowPi { b_t1: f64 },
    LowerEdgeNotPositive { omega1_t1: f64 },
}

impl fmt::Display for BandViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BandViolation::NotFinite => write!(f, "band parameters must be finite"),
            BandViolation::BandwidthNotPositive { b_t1 } => {
                write!(f, "B_T1 = {:.6}π must be > 0", b_t1 / PI)
            }
            BandViolation::BandwidthNotBelowPi { b_t1 } => {
                write!(f, "B_T1 = {:.6}π must be < π (fs1 > 2B)", b_t1 / PI)
            }
            BandViolation::LowerEdgeNotPositive { omega1_t1 } => write!(
                f,
                "omega1_T1 = {:.6}π must be > 0 (band may not touch DC)",
                omega1_t1 / PI
            ),
        }
    }
}

impl BandSpec {
    pub fn new(omega_c_t1: f64, b_t1: f64) -> Self {
        BandSpec { omega_c_t1, b_t1 }
    }

    /// Band given by its edges `[ω1·T1, ω2·T1]`.
    pub fn from_edges(omega1_t1: f64, omega2_t1: f64) -> Self {
        BandSpec {
            omega_c_t1: 0.5 * (omega1_t1 + omega2_t1),
            b_t1: omega2_t1 - omega1_t1,
        }
    }

    pub fn omega1_t1(&self) -> f64 {
        self.omega_c_t1 - 0.5 * self.b_t1
    }

    pub fn omega2_t1(&self) -> f64 {
        self.omega_c_t1 + 0.5 * self.b_t1
    }

    /// Every violated invariant; empty when the band is usable.
    pub fn validate(&self) -> Vec<BandViolation> {
        let mut out = Vec::new();
        if !self.omega_c_t1.is_finite() || !self.b_t1.is_finite() {
            out.push(BandViolation::NotFinite);
            return out;
        }
        if self.b_t1 <= 0.0 {
            out.push(BandViolation::BandwidthNotPositive { b_t1: self.b_t1 });
        }
        if self.b_t1 >= PI {
            out.push(BandViolation::BandwidthNotBelowPi { b_t1: self.b_t1 });
        }
        if self.omega1_t1() <= 0.0 {
            out.push(BandViolation::LowerEdgeNotPositive {
                omega1_t1: self.omega1_t1(),
            });
        }
        out
    }

    pub fn checked(self) -> Result<Self> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidBand(v))
        }
    }
}

/// The `M` branch impulse responses `h_n(k)`, `k = -N/2..=N/2`.
///
/// For even `M` only the even-indexed rows are needed (the odd branches feed
/// outputs that are discarded by the final downsampling) and the bank may be
/// a `designed_subset` with the odd rows absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BankWire", into = "BankWire")]
pub struct FilterBank {
    order: usize,
    rows: Vec<Option<Vec<Complex64>>>,
    band: BandSpec,
    pattern: SamplingPattern,
    designed_subset: bool,
}

impl FilterBank {
    pub fn new(
        pattern: SamplingPattern,
        band: BandSpec,
        order: usize,
        rows: Vec<Option<Vec<Complex64>>>,
        designed_subset: bool,
    ) -> Result<Self> {
        let m = pattern.period();
        if order == 0 || !order.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "filter order N = {order} must be even and positive"
            )));
        }
        if rows.len() != m {
            return Err(Error::Config(format!(
                "bank has {} rows but M = {m}",
                rows.len()
            )));
        }
        for (n, row) in rows.iter().enumerate() {
            match row {
                Some(r) if r.len() != order + 1 => {
                    return Err(Error::Config(format!(
                        "row {n} has {} taps, expected N+1 = {}",
                        r.len(),
                        order + 1
                    )))
                }
                Some(_) if designed_subset && n % 2 == 1 => {
                    return Err(Error::Config(format!(
                        "designed subset carries odd row {n}"
                    )))
                }
                None if !(designed_subset && n % 2 == 1) => {
                    return Err(Error::Config(format!("row {n} is missing")))
                }
                _ => {}
            }
        }
        if designed_subset && !m.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "designed subset requires even M, got M = {m}"
            )));
        }
        Ok(FilterBank {
            order,
            rows,
            band,
            pattern,
            designed_subset,
        })
    }

    pub fn period(&self) -> usize {
        self.pattern.period()
    }

    /// Filter order `N` (each row has `N + 1` taps).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn half_order(&self) -> i64 {
        (self.order / 2) as i64
    }

    pub fn band(&self) -> &BandSpec {
        &self.band
    }

    pub fn pattern(&self) -> &SamplingPattern {
        &self.pattern
    }

    pub fn designed_subset(&self) -> bool {
        self.designed_subset
    }

    /// Taps of branch `n mod M`, indexed by `k + N/2`.
    pub fn row(&self, n: i64) -> Option<&[Complex64]> {
        self.rows[wrap_index(n, self.period())].as_deref()
    }

    pub fn rows(&self) -> &[Option<Vec<Complex64>>] {
        &self.rows
    }

    /// Indices of the rows that are present.
    pub fn present_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().map(|_| i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReIm {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ReIm {
    fn from(z: Complex64) -> Self {
        ReIm { re: z.re, im: z.im }
    }
}

impl From<ReIm> for Complex64 {
    fn from(z: ReIm) -> Self {
        Complex64::new(z.re, z.im)
    }
}

#[derive(Serialize, Deserialize)]
struct BankWire {
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    coeffs: Vec<Option<Vec<ReIm>>>,
    band: BandSpec,
    pattern: SamplingPattern,
    designed_subset: bool,
}

impl TryFrom<BankWire> for FilterBank {
    type Error = Error;

    fn try_from(w: BankWire) -> Result<Self> {
        if w.m != w.pattern.period() {
            return Err(Error::Config(format!(
                "bank M = {} disagrees with pattern period {}",
                w.m,
                w.pattern.period()
            )));
        }
        let rows = w
            .coeffs
            .into_iter()
            .map(|r| r.map(|taps| taps.into_iter().map(Complex64::from).collect()))
            .collect();
        FilterBank::new(w.pattern, w.band, w.n, rows, w.designed_subset)
    }
}

impl From<FilterBank> for BankWire {
    fn from(b: FilterBank) -> Self {
        BankWire {
            m: b.period(),
            n: b.order,
            coeffs: b
                .rows
                .into_iter()
                .map(|r| r.map(|taps| taps.into_iter().map(ReIm::from).collect()))
                .collect(),
            band: b.band,
            pattern: b.pattern,
            designed_subset: b.designed_subset,
        }
    }
}

/// Which clock a trace is indexed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rate {
    /// High rate `fs1 = 1/T1`.
    Fs1,
    /// Output rate `fs2 = fs1/2`.
    Fs2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Real,
    Complex,
}

/// Samples at consecutive absolute indices `start, start+1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    pub start: i64,
    pub rate: Rate,
    pub kind: SampleKind,
    pub samples: Vec<Complex64>,
}

impl SignalTrace {
    pub fn new(start: i64, rate: Rate, kind: SampleKind, samples: Vec<Complex64>) -> Self {
        SignalTrace {
            start,
            rate,
            kind,
            samples,
        }
    }

    pub fn from_real(start: i64, rate: Rate, values: impl IntoIterator<Item = f64>) -> Self {
        let samples = values.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
        SignalTrace::new(start, rate, SampleKind::Real, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// One past the last absolute index.
    pub fn end(&self) -> i64 {
        self.start + self.samples.len() as i64
    }

    pub fn get(&self, index: i64) -> Option<Complex64> {
        let i = index - self.start;
        if i < 0 {
            return None;
        }
        self.samples.get(i as usize).copied()
    }

    /// Sample at an absolute index known to be in range.
    #[inline]
    pub(crate) fn at(&self, index: i64) -> Complex64 {
        self.samples[(index - self.start) as usize]
    }

    pub fn indices(&self) -> std::ops::Range<i64> {
        self.start..self.end()
    }

    /// Sub-trace over the absolute half-open index range `[from, to)`,
    /// clipped to what the trace holds.
    pub fn slice(&self, from: i64, to: i64) -> SignalTrace {
        let lo = from.max(self.start);
        let hi = to.min(self.end()).max(lo);
        let a = (lo - self.start) as usize;
        let b = (hi - self.start) as usize;
        SignalTrace::new(lo, self.rate, self.kind, self.samples[a..b].to_vec())
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}
