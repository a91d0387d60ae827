//! End-to-end runs: sample a multitone signal on the nonuniform grid,
//! reconstruct it and score the result against the exact `x2(m)`.
//!
//! SFDR comes from a noiseless run so every non-tone bin holds only image
//! spurs; SNR and MSE come from a second run of the same configuration with
//! noise added to `v(n)`.

use serde::Serialize;

use crate::analysis::{self, MetricReport, SpectrumEstimate, Window};
use crate::designer::{self, BranchDesign, DesignProblem};
use crate::error::{Error, Result};
use crate::model::{FilterBank, Rate, SignalTrace};
use crate::reconstructor::{self, block_len, Path};
use crate::signal_lab::{add_noise, MultitoneSignal, NoiseSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub problem: DesignProblem,
    pub signal: MultitoneSignal,
    /// `None` skips the noisy run.
    pub noise: Option<NoiseSpec>,
    /// Output samples `m = 0..output_len` scored for SNR/MSE.
    pub output_len: usize,
    pub fft_len: usize,
    pub window: Window,
    pub path: Path,
    /// Snap tone frequencies to exact FFT bins.
    pub coherent: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.problem.band.checked()?;
        self.signal.check_in_band(&self.problem.band)?;
        if self.signal.tones.is_empty() {
            return Err(Error::Config("at least one tone is required".into()));
        }
        if !self.fft_len.is_power_of_two() || self.fft_len < 2 {
            return Err(Error::Config(format!(
                "FFT length {} must be a power of two",
                self.fft_len
            )));
        }
        if self.output_len < self.fft_len {
            return Err(Error::Config(format!(
                "simulation length {} is shorter than the FFT length {}",
                self.output_len, self.fft_len
            )));
        }
        Ok(())
    }

    /// Tones actually used, after optional bin snapping, and their signed bins.
    pub fn resolved_signal(&self) -> (MultitoneSignal, Vec<i64>) {
        if self.coherent {
            analysis::snap_to_bins(&self.signal, self.fft_len)
        } else {
            let bins = self
                .signal
                .tones
                .iter()
                .map(|t| analysis::tone_bin(t.omega_t1, self.fft_len))
                .collect();
            (self.signal.clone(), bins)
        }
    }

    /// High-rate index range `[start, end)` of `v(n)` that yields every
    /// output `m = 0..output_len` on either path, aligned to whole blocks.
    pub fn input_range(&self) -> (i64, i64) {
        let l = block_len(self.problem.pattern.period()) as i64;
        let half = self.problem.half_order();
        let lo = -(half + 2 * l);
        let hi = 2 * self.output_len as i64 + half + 2 * l;
        (lo.div_euclid(l) * l, (hi + l - 1).div_euclid(l) * l)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    /// From the noiseless run.
    #[serde(serialize_with = "analysis::serialize_db")]
    pub sfdr_db: f64,
    /// From the noisy run when present, otherwise distortion-limited.
    #[serde(serialize_with = "analysis::serialize_db")]
    pub snr_db: f64,
    #[serde(serialize_with = "analysis::serialize_db")]
    pub mse_db: f64,
    pub noiseless: MetricReport,
    pub noisy: Option<MetricReport>,
    pub path: Path,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub report: SimulationReport,
    /// Noiseless spectrum (the plotted quantity).
    pub spectrum: SpectrumEstimate,
    pub reference: SignalTrace,
    pub clean_output: SignalTrace,
    pub noisy_output: Option<SignalTrace>,
}

pub fn simulate(scenario: &Scenario, bank: &FilterBank) -> Result<SimulationOutput> {
    scenario.validate()?;
    let (signal, bins) = scenario.resolved_signal();
    let band = scenario.problem.band;
    let pattern = &scenario.problem.pattern;
    let len = scenario.output_len as i64;

    let (n0, n1) = scenario.input_range();
    let v = signal.sample_nonuniform(band.omega_c_t1, pattern, n0, (n1 - n0) as usize);
    let reference = signal.sample_uniform(Rate::Fs2, 0, scenario.output_len);

    let run = |input: &SignalTrace| -> Result<SignalTrace> {
        let y = reconstructor::reconstruct(input, bank, scenario.path)?;
        let y = y.slice(0, len);
        if y.start != 0 || y.end() != len {
            return Err(Error::InputLength(format!(
                "reconstruction covers [{}, {}) instead of [0, {len})",
                y.start,
                y.end()
            )));
        }
        Ok(y)
    };

    let clean_output = run(&v)?;
    let spectrum = analysis::periodogram(&clean_output, scenario.fft_len, scenario.window)?;
    let noiseless = analysis::metric_report(&clean_output, &reference, &spectrum, &bins)?;

    let (noisy, noisy_output) = match &scenario.noise {
        Some(spec) => {
            let vn = add_noise(&v, spec, v.mean_power())?;
            let y = run(&vn)?;
            let spec_n = analysis::periodogram(&y, scenario.fft_len, scenario.window)?;
            let report = analysis::metric_report(&y, &reference, &spec_n, &bins)?;
            (Some(report), Some(y))
        }
        None => (None, None),
    };

    let scored = noisy.as_ref().unwrap_or(&noiseless);
    let report = SimulationReport {
        sfdr_db: noiseless.sfdr_db,
        snr_db: scored.snr_db,
        mse_db: scored.mse_db,
        noiseless: noiseless.clone(),
        noisy,
        path: scenario.path,
    };
    Ok(SimulationOutput {
        report,
        spectrum,
        reference,
        clean_output,
        noisy_output,
    })
}

/// Designs the bank for the scenario and runs it.
pub fn design_and_simulate(
    scenario: &Scenario,
) -> Result<(FilterBank, Vec<BranchDesign>, SimulationOutput)> {
    let (bank, designs) = designer::design_bank_report(&scenario.problem)?;
    let out = simulate(scenario, &bank)?;
    Ok((bank, designs, out))
}
