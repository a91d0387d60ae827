//! Reconstruction quality metrics.
//!
//! Spectra are taken at the output rate `fs2`. A baseband tone at `Ω = ω·T1`
//! appears at `ω·T2 = 2Ω`, which for a `K`-point FFT is bin `KΩ/π`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::SignalTrace;
use crate::signal_lab::{MultitoneSignal, Tone};

/// Magnitudes below this (relative to the peak) are clamped.
pub const MAG_FLOOR_DB: f64 = -400.0;

/// Ratios reported for an exactly zero error power exceed this many dB.
pub const SNR_CAP_DB: f64 = 300.0;

/// Stand-in written to JSON for infinite dB values.
const DB_SENTINEL: f64 = 999.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    fn weights(self, k: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; k],
            Window::Hann => (0..k)
                .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / k as f64).cos()))
                .collect(),
        }
    }
}

/// One `K`-point magnitude spectrum, bins ordered from `-K/2` to `K/2 - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEstimate {
    /// Bin frequencies `ω·T2/π` in `[-1, 1)`.
    pub omega_over_pi: Vec<f64>,
    /// Magnitude relative to the strongest bin, in dB.
    pub mag_db: Vec<f64>,
    pub window: Window,
    pub fft_len: usize,
}

impl SpectrumEstimate {
    /// Position in the arrays of the signed FFT bin `bin`.
    pub fn index_of_bin(&self, bin: i64) -> usize {
        let k = self.fft_len as i64;
        (bin.rem_euclid(k) + k / 2).rem_euclid(k) as usize
    }

    pub fn peak_index(&self) -> usize {
        self.mag_db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Magnitude spectrum of the first `fft_len` samples of `trace`.
///
/// An all-zero segment has no peak to normalize to and is rejected with
/// [`Error::DegenerateMeasurement`].
pub fn periodogram(trace: &SignalTrace, fft_len: usize, window: Window) -> Result<SpectrumEstimate> {
    if fft_len < 2 || !fft_len.is_power_of_two() {
        return Err(Error::Domain(format!(
            "FFT length {fft_len} must be a power of two ≥ 2"
        )));
    }
    if trace.len() < fft_len {
        return Err(Error::InputLength(format!(
            "trace has {} samples, FFT needs {fft_len}",
            trace.len()
        )));
    }
    let w = window.weights(fft_len);
    let mut buf: Vec<Complex64> = trace.samples[..fft_len]
        .iter()
        .zip(&w)
        .map(|(z, &w)| z * w)
        .collect();
    FftPlanner::new().plan_fft_forward(fft_len).process(&mut buf);

    let mags: Vec<f64> = buf.iter().map(|z| z.norm()).collect();
    let peak = mags.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::DegenerateMeasurement("spectrum of an all-zero segment".into()));
    }

    let half = fft_len / 2;
    let mut omega_over_pi = Vec::with_capacity(fft_len);
    let mut mag_db = Vec::with_capacity(fft_len);
    for i in 0..fft_len {
        let bin = i as i64 - half as i64;
        omega_over_pi.push(2.0 * bin as f64 / fft_len as f64);
        let mag = mags[bin.rem_euclid(fft_len as i64) as usize];
        mag_db.push((20.0 * (mag / peak).log10()).max(MAG_FLOOR_DB));
    }
    Ok(SpectrumEstimate {
        omega_over_pi,
        mag_db,
        window,
        fft_len,
    })
}

/// Signed FFT bin of a baseband tone at `Ω` for a `K`-point output spectrum.
pub fn tone_bin(omega_t1: f64, fft_len: usize) -> i64 {
    (fft_len as f64 * omega_t1 / PI).round() as i64
}

/// Moves every tone to the nearest exact FFT bin so a rectangular window
/// sees no leakage. Returns the adjusted signal and the signed bins.
pub fn snap_to_bins(signal: &MultitoneSignal, fft_len: usize) -> (MultitoneSignal, Vec<i64>) {
    let bins: Vec<i64> = signal
        .tones
        .iter()
        .map(|t| tone_bin(t.omega_t1, fft_len))
        .collect();
    let tones = signal
        .tones
        .iter()
        .zip(&bins)
        .map(|(t, &b)| Tone {
            omega_t1: PI * b as f64 / fft_len as f64,
            ..*t
        })
        .collect();
    (MultitoneSignal::new(tones), bins)
}

/// Strongest tone bin minus strongest bin not within ±1 of any tone, in dB.
/// `tone_bins` are array positions in `spec`.
pub fn measure_sfdr(spec: &SpectrumEstimate, tone_bins: &[usize]) -> Result<f64> {
    if tone_bins.is_empty() {
        return Err(Error::DegenerateMeasurement("no tone bins given".into()));
    }
    let k = spec.fft_len;
    let mut excluded = vec![false; k];
    for &b in tone_bins {
        if b >= k {
            return Err(Error::Domain(format!("tone bin {b} outside FFT length {k}")));
        }
        for d in [k - 1, 0, 1] {
            excluded[(b + d) % k] = true;
        }
    }
    let tone = tone_bins
        .iter()
        .map(|&b| spec.mag_db[b])
        .fold(f64::NEG_INFINITY, f64::max);
    let spur = spec
        .mag_db
        .iter()
        .zip(&excluded)
        .filter(|(_, &ex)| !ex)
        .map(|(&m, _)| m)
        .fold(f64::NEG_INFINITY, f64::max);
    if spur == f64::NEG_INFINITY {
        return Err(Error::DegenerateMeasurement(
            "every bin is within one bin of a tone".into(),
        ));
    }
    Ok(tone - spur)
}

/// Matching sample slices of two traces and their absolute index range.
type Overlap<'a> = (&'a [Complex64], &'a [Complex64], (i64, i64));

/// Overlapping absolute-index range of two traces.
fn overlap<'a>(a: &'a SignalTrace, b: &'a SignalTrace) -> Result<Overlap<'a>> {
    let lo = a.start.max(b.start);
    let hi = a.end().min(b.end());
    if hi <= lo {
        return Err(Error::InputLength(format!(
            "traces [{}, {}) and [{}, {}) do not overlap",
            a.start,
            a.end(),
            b.start,
            b.end()
        )));
    }
    let sa = &a.samples[(lo - a.start) as usize..(hi - a.start) as usize];
    let sb = &b.samples[(lo - b.start) as usize..(hi - b.start) as usize];
    Ok((sa, sb, (lo, hi)))
}

struct ErrorStats {
    signal: f64,
    error: f64,
    count: usize,
    range: (i64, i64),
}

fn error_stats(y2: &SignalTrace, x2_ref: &SignalTrace) -> Result<ErrorStats> {
    let (y, x, range) = overlap(y2, x2_ref)?;
    let signal: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    let error: f64 = y.iter().zip(x).map(|(a, b)| (a - b).norm_sqr()).sum();
    if signal == 0.0 {
        return Err(Error::Domain("reference has zero power".into()));
    }
    Ok(ErrorStats {
        signal,
        error,
        count: x.len(),
        range,
    })
}

/// `10 log10(Σ|x2|² / Σ|y2 - x2|²)` over the overlap; `+∞` for an exact match.
pub fn measure_snr(y2: &SignalTrace, x2_ref: &SignalTrace) -> Result<f64> {
    let s = error_stats(y2, x2_ref)?;
    Ok(10.0 * (s.signal / s.error).log10())
}

/// `10 log10(mean |y2 - x2|²)`; `-∞` for an exact match.
pub fn measure_mse(y2: &SignalTrace, x2_ref: &SignalTrace) -> Result<f64> {
    let s = error_stats(y2, x2_ref)?;
    Ok(10.0 * (s.error / s.count as f64).log10())
}

/// `10 log10(mean |x2|²)` over the same overlap the other metrics use.
pub fn signal_power_db(y2: &SignalTrace, x2_ref: &SignalTrace) -> Result<f64> {
    let s = error_stats(y2, x2_ref)?;
    Ok(10.0 * (s.signal / s.count as f64).log10())
}

pub(crate) fn serialize_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    let out = if v.is_finite() {
        *v
    } else if *v > 0.0 {
        DB_SENTINEL
    } else {
        -DB_SENTINEL
    };
    s.serialize_f64(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    #[serde(serialize_with = "serialize_db")]
    pub snr_db: f64,
    #[serde(serialize_with = "serialize_db")]
    pub sfdr_db: f64,
    #[serde(serialize_with = "serialize_db")]
    pub mse_db: f64,
    #[serde(serialize_with = "serialize_db")]
    pub signal_power_db: f64,
    /// Signed FFT bins of the tones.
    pub tone_bins: Vec<i64>,
    /// Output indices `[start, end)` the metrics were computed over.
    pub valid_range: (i64, i64),
}

/// SNR/MSE from `y2` against `x2_ref`; SFDR from `spectrum` at the given signed bins.
pub fn metric_report(
    y2: &SignalTrace,
    x2_ref: &SignalTrace,
    spectrum: &SpectrumEstimate,
    tone_bins: &[i64],
) -> Result<MetricReport> {
    let s = error_stats(y2, x2_ref)?;
    let positions: Vec<usize> = tone_bins.iter().map(|&b| spectrum.index_of_bin(b)).collect();
    Ok(MetricReport {
        snr_db: 10.0 * (s.signal / s.error).log10(),
        sfdr_db: measure_sfdr(spectrum, &positions)?,
        mse_db: 10.0 * (s.error / s.count as f64).log10(),
        signal_power_db: 10.0 * (s.signal / s.count as f64).log10(),
        tone_bins: tone_bins.to_vec(),
        valid_range: s.range,
    })
}
