//! Reconstruction of `y2(m) ≈ x2(m)` from the nonuniform samples `v(n)`.
//!
//! Two realizations are provided:
//!
//! * [`reconstruct_direct`] runs the `M`-periodic time-varying filter at the
//!   high rate, `y(n) = Σ_k v(n-k) h_{n mod M}(k)`, modulates with
//!   `2·exp(-jω_c T1 n)` and keeps every second sample.
//! * [`reconstruct_polyphase`] computes only the retained outputs. The input
//!   is split into `L` low-rate streams (`L = M` for even `M`, `L = 2M` for
//!   odd `M`) and an `(L/2)×L` grid of FIR components runs once per block.
//!
//! Both produce bit-for-bit the same modulation and agree to rounding on the
//! filter sums. Output traces are indexed by the absolute output index `m`,
//! so `y2(m)` lines up with the reference `x2(m)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{wrap_index, FilterBank, Rate, ReIm, SampleKind, SignalTrace};

/// `exp(-jω_c T1 n)` with the per-sample increment reduced modulo 2π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carrier {
    cycles_per_sample: f64,
}

impl Carrier {
    pub fn new(omega_c_t1: f64) -> Self {
        Carrier {
            cycles_per_sample: (omega_c_t1 / TAU).rem_euclid(1.0),
        }
    }

    /// Rotation applied at high-rate index `n`.
    #[inline]
    pub fn rotation(&self, n: i64) -> Complex64 {
        let turns = (self.cycles_per_sample * n as f64).rem_euclid(1.0);
        Complex64::from_polar(1.0, -TAU * turns)
    }

    /// Output-rate rotator `exp(-j2ω_c T1 m)`, i.e. the high-rate rotation at `n = 2m`.
    #[inline]
    pub fn output_rotation(&self, m: i64) -> Complex64 {
        self.rotation(2 * m)
    }
}

/// Observer for the multiply work done by a reconstruction path.
pub trait Probe {
    /// `mults` complex multiplications were spent on an output of `branch`.
    fn branch_used(&mut self, _branch: usize, _mults: usize) {}
}

impl Probe for () {}

/// Counts multiplications per branch and records the order in which
/// branches produced outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UsageLog {
    pub multiplies: u64,
    pub per_branch: Vec<u64>,
    pub order: Vec<usize>,
}

impl UsageLog {
    pub fn new(period: usize) -> Self {
        UsageLog {
            multiplies: 0,
            per_branch: vec![0; period],
            order: Vec::new(),
        }
    }
}

impl Probe for UsageLog {
    fn branch_used(&mut self, branch: usize, mults: usize) {
        if branch >= self.per_branch.len() {
            self.per_branch.resize(branch + 1, 0);
        }
        self.per_branch[branch] += mults as u64;
        self.multiplies += mults as u64;
        self.order.push(branch);
    }
}

fn required_residues(m: usize) -> impl Iterator<Item = usize> {
    let step = if m.is_multiple_of(2) { 2 } else { 1 };
    (0..m).step_by(step)
}

fn check_rows(bank: &FilterBank) -> Result<()> {
    for r in required_residues(bank.period()) {
        if bank.row(r as i64).is_none() {
            return Err(Error::Config(format!(
                "branch {r} is needed for M = {} but the bank has no row for it",
                bank.period()
            )));
        }
    }
    Ok(())
}

pub fn reconstruct_direct(v: &SignalTrace, bank: &FilterBank) -> Result<SignalTrace> {
    reconstruct_direct_probed(v, bank, &mut ())
}

/// High-rate reference path. Every `y(n)` whose window fits inside `v` and
/// whose branch row exists is computed, including the odd-`n` outputs that
/// the downsampling throws away.
pub fn reconstruct_direct_probed<P: Probe>(
    v: &SignalTrace,
    bank: &FilterBank,
    probe: &mut P,
) -> Result<SignalTrace> {
    check_rows(bank)?;
    let half = bank.half_order();
    let lo = v.start + half;
    let hi = v.end() - 1 - half;
    if hi < lo + 1 {
        return Err(Error::InputLength(format!(
            "{} samples cannot cover two full windows of {} taps",
            v.len(),
            bank.order() + 1
        )));
    }
    let carrier = Carrier::new(bank.band().omega_c_t1);
    let m = bank.period();

    let mut y1 = Vec::with_capacity((hi - lo + 1) as usize);
    for n in lo..=hi {
        let Some(h) = bank.row(n) else {
            // odd branch of an even-M subset bank: output would be discarded
            y1.push(None);
            continue;
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, tap) in h.iter().enumerate() {
            let k = i as i64 - half;
            acc += v.at(n - k) * tap;
        }
        probe.branch_used(wrap_index(n, m), h.len());
        y1.push(Some(2.0 * acc * carrier.rotation(n)));
    }

    // keep y1(2m) for the first floor(len/2) even indices
    let count = (hi - lo + 1) as usize / 2;
    let m0 = lo.div_euclid(2) + lo.rem_euclid(2);
    let samples = (0..count as i64)
        .map(|i| {
            let n = 2 * (m0 + i);
            y1[(n - lo) as usize].expect("even rows are present")
        })
        .collect();
    Ok(SignalTrace::new(m0, Rate::Fs2, SampleKind::Complex, samples))
}

/// Order in which the branch filters produce retained outputs within one block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BranchSchedule(pub Vec<usize>);

impl BranchSchedule {
    /// `(0, 2, …, M-2)` for even `M`; `(0, 2, …, M-1, 1, 3, …, M-2)` for odd `M`.
    pub fn for_period(m: usize) -> Self {
        let l = block_len(m);
        BranchSchedule((0..l).step_by(2).map(|r| r % m).collect())
    }

    pub fn branches(&self) -> &[usize] {
        &self.0
    }
}

/// `L = M` for even `M`, `L = 2M` for odd `M`.
pub fn block_len(m: usize) -> usize {
    if m.is_multiple_of(2) {
        m
    } else {
        2 * m
    }
}

/// One entry `P_{r,l}` of the polyphase matrix: a low-rate FIR applied to
/// input stream `l`, with tap `i` multiplying `V_l(b + offset + i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyphaseComponent {
    pub offset: i64,
    #[serde(serialize_with = "serialize_taps")]
    pub taps: Vec<Complex64>,
}

fn serialize_taps<S: Serializer>(taps: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(taps.iter().map(|&z| ReIm::from(z)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyphaseBank {
    #[serde(rename = "L")]
    pub block_len: usize,
    #[serde(rename = "M")]
    pub period: usize,
    #[serde(rename = "N")]
    pub order: usize,
    pub schedule: BranchSchedule,
    /// `L/2` output phases, each with `L` components.
    pub rows: Vec<Vec<PolyphaseComponent>>,
    /// Delay, in high-rate samples, a causal realization adds to absorb the
    /// largest block advance.
    pub latency: usize,
    pub omega_c_t1: f64,
}

impl PolyphaseBank {
    pub fn tap_count(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .map(|c| c.taps.len())
            .sum()
    }

    /// Smallest and largest block offsets touched by any component.
    fn block_reach(&self) -> (i64, i64) {
        let comps = self.rows.iter().flat_map(|r| r.iter()).filter(|c| !c.taps.is_empty());
        let lo = comps.clone().map(|c| c.offset).min().unwrap_or(0);
        let hi = comps
            .map(|c| c.offset + c.taps.len() as i64 - 1)
            .max()
            .unwrap_or(0);
        (lo, hi)
    }
}

/// Splits each retained-output filter into its `L` polyphase components.
///
/// Output phase `r` (even, `0 ≤ r < L`) of block `b` is `y(bL + r)` and uses
/// branch `g_r = h_{r mod M}`. Writing the input index as `(b+j)L + l` gives
/// `P_{r,l}(j) = g_r(r - l - jL)`.
pub fn build_polyphase(bank: &FilterBank) -> Result<PolyphaseBank> {
    check_rows(bank)?;
    let m = bank.period();
    let l_len = block_len(m) as i64;
    let half = bank.half_order();
    let schedule = BranchSchedule::for_period(m);

    let mut rows = Vec::with_capacity(schedule.0.len());
    let mut max_advance = 0i64;
    for (q, &branch) in schedule.0.iter().enumerate() {
        let r = 2 * q as i64;
        let g = bank.row(branch as i64).ok_or_else(|| {
            Error::Config(format!("branch {branch} missing from bank"))
        })?;
        let mut comps = Vec::with_capacity(l_len as usize);
        for l in 0..l_len {
            let j_lo = (r - l - half).div_euclid(l_len) + i64::from((r - l - half).rem_euclid(l_len) != 0);
            let j_hi = (r - l + half).div_euclid(l_len);
            if j_hi < j_lo {
                comps.push(PolyphaseComponent {
                    offset: 0,
                    taps: Vec::new(),
                });
                continue;
            }
            let taps = (j_lo..=j_hi)
                .map(|j| {
                    let k = r - l - j * l_len;
                    g[(k + half) as usize]
                })
                .collect();
            max_advance = max_advance.max(j_hi);
            comps.push(PolyphaseComponent { offset: j_lo, taps });
        }
        rows.push(comps);
    }
    Ok(PolyphaseBank {
        block_len: l_len as usize,
        period: m,
        order: bank.order(),
        schedule,
        rows,
        latency: (max_advance * l_len) as usize,
        omega_c_t1: bank.band().omega_c_t1,
    })
}

/// Drops leading and trailing samples so the trace starts on a block
/// boundary and holds whole blocks.
pub fn trim_to_blocks(v: &SignalTrace, block_len: usize) -> SignalTrace {
    let l = block_len as i64;
    let from = v.start.div_euclid(l) * l + if v.start.rem_euclid(l) == 0 { 0 } else { l };
    let to = v.end().div_euclid(l) * l;
    v.slice(from, to.max(from))
}

pub fn reconstruct_polyphase(v: &SignalTrace, poly: &PolyphaseBank) -> Result<SignalTrace> {
    reconstruct_polyphase_probed(v, poly, &mut ())
}

/// Blocked low-rate path. `v` must start on a block boundary and hold a
/// whole number of blocks (see [`trim_to_blocks`]).
pub fn reconstruct_polyphase_probed<P: Probe>(
    v: &SignalTrace,
    poly: &PolyphaseBank,
    probe: &mut P,
) -> Result<SignalTrace> {
    let l_len = poly.block_len as i64;
    if v.start.rem_euclid(l_len) != 0 || !v.len().is_multiple_of(poly.block_len) {
        return Err(Error::InputLength(format!(
            "input [{}, {}) is not aligned to blocks of L = {}",
            v.start,
            v.end(),
            l_len
        )));
    }
    let b0 = v.start.div_euclid(l_len);
    let nblocks = (v.len() / poly.block_len) as i64;

    // low-rate input streams V_l(b) = v(bL + l)
    let streams: Vec<Vec<Complex64>> = (0..l_len)
        .map(|l| {
            (0..nblocks)
                .map(|b| v.samples[(b * l_len + l) as usize])
                .collect()
        })
        .collect();

    let (reach_lo, reach_hi) = poly.block_reach();
    let first = b0 - reach_lo.min(0);
    let last = b0 + nblocks - 1 - reach_hi.max(0);
    if last < first {
        return Err(Error::InputLength(format!(
            "{nblocks} blocks cannot cover the filter reach of {} blocks",
            reach_hi - reach_lo + 1
        )));
    }

    let carrier = Carrier::new(poly.omega_c_t1);
    let phases = poly.rows.len() as i64;
    let mut samples = Vec::with_capacity(((last - first + 1) * phases) as usize);
    for b in first..=last {
        for (q, comps) in poly.rows.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut mults = 0;
            for (stream, comp) in streams.iter().zip(comps) {
                let base = b - b0 + comp.offset;
                for (i, tap) in comp.taps.iter().enumerate() {
                    acc += stream[(base + i as i64) as usize] * tap;
                }
                mults += comp.taps.len();
            }
            probe.branch_used(poly.schedule.0[q], mults);
            let m = b * phases + q as i64;
            samples.push(2.0 * acc * carrier.output_rotation(m));
        }
    }
    Ok(SignalTrace::new(
        first * phases,
        Rate::Fs2,
        SampleKind::Complex,
        samples,
    ))
}

/// Which realization [`reconstruct`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Path {
    Direct,
    #[default]
    Polyphase,
}

/// Runs either path on `v`; for the polyphase path the input is first
/// trimmed to whole blocks.
pub fn reconstruct(v: &SignalTrace, bank: &FilterBank, path: Path) -> Result<SignalTrace> {
    match path {
        Path::Direct => reconstruct_direct(v, bank),
        Path::Polyphase => {
            let poly = build_polyphase(bank)?;
            reconstruct_polyphase(&trim_to_blocks(v, poly.block_len), &poly)
        }
    }
}
