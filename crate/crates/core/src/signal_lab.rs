//! Synthetic test signals: analytic multitone complex baseband signals, the
//! real bandpass signal they modulate, and its samples on the nonuniform grid.
//!
//! Time is normalized, `τ = t/T1`, so the high-rate grid is `τ = n` and the
//! nonuniform grid is `τ = n + d_n`. Signals are evaluated in closed form at
//! arbitrary instants; no interpolation is involved.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BandSpec, Rate, SampleKind, SamplingPattern, SignalTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub amplitude: f64,
    /// Phase in radians.
    pub phase: f64,
    /// Baseband frequency `Ω = ω·T1` in radians.
    pub omega_t1: f64,
}

/// `x_c(τ) = Σ_i A_i exp(j(Ω_i τ + φ_i))`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultitoneSignal {
    pub tones: Vec<Tone>,
}

impl MultitoneSignal {
    pub fn new(tones: Vec<Tone>) -> Self {
        MultitoneSignal { tones }
    }

    /// Four tones with amplitudes (1, 0.5, 0.5, 0.5), zero phases and
    /// frequencies (-0.31π, -0.10π, 0.12π, 0.29π). No tone sits at the
    /// mirror frequency of another, so image spurs stay visible.
    pub fn default_four_tone() -> Self {
        let spec = [(1.0, -0.31), (0.5, -0.10), (0.5, 0.12), (0.5, 0.29)];
        MultitoneSignal::new(
            spec.iter()
                .map(|&(a, f)| Tone {
                    amplitude: a,
                    phase: 0.0,
                    omega_t1: f * PI,
                })
                .collect(),
        )
    }

    /// Rejects tones outside `|Ω| < B·T1/2`.
    pub fn check_in_band(&self, band: &BandSpec) -> Result<()> {
        let limit = 0.5 * band.b_t1;
        for (i, t) in self.tones.iter().enumerate() {
            if t.omega_t1.is_nan() || t.omega_t1.abs() >= limit {
                return Err(Error::Config(format!(
                    "tone {i} at {:.6}π lies outside the baseband |Ω| < {:.6}π",
                    t.omega_t1 / PI,
                    limit / PI
                )));
            }
        }
        Ok(())
    }

    /// Mean power `Σ A_i²` (distinct frequencies).
    pub fn power(&self) -> f64 {
        self.tones.iter().map(|t| t.amplitude * t.amplitude).sum()
    }

    pub fn eval_baseband(&self, tau: f64) -> Complex64 {
        self.tones
            .iter()
            .map(|t| Complex64::from_polar(t.amplitude, t.omega_t1 * tau + t.phase))
            .sum()
    }

    /// `x_r(τ) = Re{x_c(τ) exp(jω_c T1 τ)}`.
    pub fn eval_bandpass(&self, omega_c_t1: f64, tau: f64) -> f64 {
        // Re{A e^{j((Ω+ωc)τ+φ)}} per tone, evaluated directly
        self.tones
            .iter()
            .map(|t| t.amplitude * ((t.omega_t1 + omega_c_t1) * tau + t.phase).cos())
            .sum()
    }

    /// `x_1(n) = x_c(n)` at rate fs1 or `x_2(m) = x_c(2m)` at rate fs2 for
    /// `count` consecutive indices starting at `start`.
    pub fn sample_uniform(&self, rate: Rate, start: i64, count: usize) -> SignalTrace {
        let step = match rate {
            Rate::Fs1 => 1.0,
            Rate::Fs2 => 2.0,
        };
        let samples = (0..count as i64)
            .map(|i| self.eval_baseband(step * (start + i) as f64))
            .collect();
        SignalTrace::new(start, rate, SampleKind::Complex, samples)
    }

    /// `v(n) = x_r(n + d_n)` for `n` in `[start, start + count)`.
    pub fn sample_nonuniform(
        &self,
        omega_c_t1: f64,
        pattern: &SamplingPattern,
        start: i64,
        count: usize,
    ) -> SignalTrace {
        let values = (start..start + count as i64)
            .map(|n| self.eval_bandpass(omega_c_t1, n as f64 + pattern.skew_at(n)));
        SignalTrace::from_real(start, Rate::Fs1, values)
    }
}

/// Additive white Gaussian noise at a given SNR; `snr_db = +∞` disables it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn disabled() -> Self {
        NoiseSpec {
            snr_db: f64::INFINITY,
            seed: 0,
        }
    }

    pub fn variance(&self, reference_power: f64) -> f64 {
        reference_power * 10f64.powf(-self.snr_db / 10.0)
    }
}

/// Adds noise of variance `reference_power·10^(-snr/10)`: real for real
/// traces, circular complex (variance split evenly) for complex traces.
pub fn add_noise(trace: &SignalTrace, spec: &NoiseSpec, reference_power: f64) -> Result<SignalTrace> {
    if !(reference_power > 0.0 && reference_power.is_finite()) {
        return Err(Error::Domain(format!(
            "reference power {reference_power} must be positive and finite"
        )));
    }
    if spec.snr_db.is_nan() {
        return Err(Error::Domain("noise SNR is NaN".into()));
    }
    let mut out = trace.clone();
    if spec.snr_db == f64::INFINITY {
        return Ok(out);
    }
    let var = spec.variance(reference_power);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match trace.kind {
        SampleKind::Real => {
            let normal = Normal::new(0.0, var.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
            for z in &mut out.samples {
                z.re += normal.sample(&mut rng);
            }
        }
        SampleKind::Complex => {
            let normal =
                Normal::new(0.0, (0.5 * var).sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
            for z in &mut out.samples {
                z.re += normal.sample(&mut rng);
                z.im += normal.sample(&mut rng);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(a: f64, phase: f64, w: f64) -> MultitoneSignal {
        MultitoneSignal::new(vec![Tone {
            amplitude: a,
            phase,
            omega_t1: w,
        }])
    }

    #[test]
    fn baseband_basics() {
        let s = tone(1.0, 0.0, 0.2 * PI);
        assert!((s.eval_baseband(0.0) - 1.0).norm() < 1e-16);
        assert_eq!(MultitoneSignal::default().eval_baseband(3.7), Complex64::new(0.0, 0.0));
        for tau in [0.3, 2.0, 17.25] {
            assert!((s.eval_baseband(tau) - s.eval_baseband(-tau).conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn bandpass_forms_agree() {
        let s = MultitoneSignal::default_four_tone();
        let wc = 5.15 * PI;
        for i in 0..200 {
            let tau = -50.0 + 0.37 * i as f64;
            let xc = s.eval_baseband(tau);
            let rot = Complex64::from_polar(1.0, wc * tau);
            let half_sum = 0.5 * (xc * rot + xc.conj() * rot.conj());
            let via_re = (xc * rot).re;
            let direct = s.eval_bandpass(wc, tau);
            assert!(half_sum.im.abs() <= 1e-15);
            assert!((half_sum.re - via_re).abs() <= 1e-15);
            assert!((direct - via_re).abs() < 1e-12);
        }
    }

    #[test]
    fn single_tone_bandpass_is_cosine() {
        let w = -0.2 * PI;
        let wc = 5.15 * PI;
        let s = tone(1.0, 0.0, w);
        for tau in [0.0, 0.5, 11.3] {
            assert!((s.eval_bandpass(wc, tau) - ((w + wc) * tau).cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn downsampled_reference_matches() {
        let s = MultitoneSignal::default_four_tone();
        let x1 = s.sample_uniform(Rate::Fs1, -40, 200);
        let x2 = s.sample_uniform(Rate::Fs2, -20, 100);
        for m in x2.indices() {
            assert_eq!(x2.get(m), x1.get(2 * m));
        }
        let w = 0.37;
        let one = tone(1.0, 0.0, w).sample_uniform(Rate::Fs1, 0, 50);
        for n in one.indices() {
            assert!((one.get(n).unwrap() - Complex64::from_polar(1.0, w * n as f64)).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_signal_samples_to_zero() {
        let t = MultitoneSignal::default().sample_uniform(Rate::Fs2, 0, 16);
        assert!(t.samples.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn nonuniform_sampling() {
        let s = MultitoneSignal::default_four_tone();
        let wc = 5.15 * PI;
        let uniform = SamplingPattern::uniform(2).unwrap();
        let v = s.sample_nonuniform(wc, &uniform, -10, 40);
        let x1 = s.sample_uniform(Rate::Fs1, -10, 40);
        for n in v.indices() {
            let expect = (x1.get(n).unwrap() * Complex64::from_polar(1.0, wc * n as f64)).re;
            assert!((v.get(n).unwrap().re - expect).abs() < 1e-12);
        }

        // relabeling the pattern by whole periods changes nothing
        let p = SamplingPattern::new(vec![0.0, -0.15, 0.2]).unwrap();
        let a = s.sample_nonuniform(wc, &p, 0, 30);
        let b = s.sample_nonuniform(wc, &p.rotated(3), 0, 30);
        assert_eq!(a, b);
    }

    #[test]
    fn in_band_check() {
        let band = BandSpec::new(5.15 * PI, 0.8 * PI);
        assert!(MultitoneSignal::default_four_tone().check_in_band(&band).is_ok());
        assert!(tone(1.0, 0.0, 0.4 * PI).check_in_band(&band).is_err());
        assert!(tone(1.0, 0.0, -0.41 * PI).check_in_band(&band).is_err());
    }

    #[test]
    fn noise_contract() {
        let s = MultitoneSignal::default_four_tone();
        let v = s.sample_nonuniform(5.15 * PI, &SamplingPattern::uniform(1).unwrap(), 0, 64);
        let same = add_noise(&v, &NoiseSpec::disabled(), 1.0).unwrap();
        assert_eq!(same, v);

        let spec = NoiseSpec { snr_db: 20.0, seed: 7 };
        let a = add_noise(&v, &spec, 1.0).unwrap();
        let b = add_noise(&v, &spec, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().all(|z| z.im == 0.0));
        let c = add_noise(&v, &NoiseSpec { seed: 8, ..spec }, 1.0).unwrap();
        assert_ne!(a, c);

        assert!(matches!(add_noise(&v, &spec, 0.0), Err(Error::Domain(_))));
        assert!(matches!(add_noise(&v, &spec, -1.0), Err(Error::Domain(_))));
    }
}
