//! JSON run configuration. Frequencies are given divided by π.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nusrec_core::analysis::Window;
use nusrec_core::designer::DesignProblem;
use nusrec_core::experiment::Scenario;
use nusrec_core::reconstructor::Path as RecPath;
use nusrec_core::signal_lab::{MultitoneSignal, NoiseSpec, Tone};
use nusrec_core::{BandSpec, SamplingPattern};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub skews: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub omega_c_over_pi: f64,
    pub bandwidth_over_pi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneConfig {
    pub amplitude: f64,
    /// Baseband frequency `Ω/π`, with `|Ω| < B·T1/2`.
    pub omega_over_pi: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub snr_db: f64,
    pub seed: u64,
    #[serde(default = "yes")]
    pub enabled: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            snr_db: 61.8,
            seed: 1,
            enabled: true,
        }
    }
}

fn yes() -> bool {
    true
}

fn default_tones() -> Vec<ToneConfig> {
    MultitoneSignal::default_four_tone()
        .tones
        .iter()
        .map(|t| ToneConfig {
            amplitude: t.amplitude,
            omega_over_pi: t.omega_t1 / PI,
            phase_rad: t.phase,
        })
        .collect()
}

fn default_length() -> usize {
    8192
}

fn default_fft() -> usize {
    4096
}

fn default_points() -> usize {
    2001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pattern: PatternConfig,
    pub band: BandConfig,
    pub filter_order: usize,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default = "default_tones")]
    pub tones: Vec<ToneConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Output samples `m = 0..simulation_length` used for SNR and MSE.
    #[serde(default = "default_length")]
    pub simulation_length: usize,
    #[serde(default = "default_fft")]
    pub fft_len: usize,
    #[serde(default)]
    pub window: Window,
    /// Snap tones to FFT bins.
    #[serde(default = "yes")]
    pub coherent: bool,
    #[serde(default)]
    pub path: RecPath,
    /// Grid size of the response CSVs written by `design`.
    #[serde(default = "default_points")]
    pub response_points: usize,
    /// Not part of the configuration hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    /// SHA-256 of the canonical JSON of the resolved configuration,
    /// excluding the output directory.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = None;
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn band(&self) -> BandSpec {
        BandSpec::new(
            self.band.omega_c_over_pi * PI,
            self.band.bandwidth_over_pi * PI,
        )
    }

    pub fn problem(&self) -> CliResult<DesignProblem> {
        if self.pattern.skews.len() != self.pattern.m {
            return Err(CliError::Validation(format!(
                "pattern.M = {} but {} skews were given",
                self.pattern.m,
                self.pattern.skews.len()
            )));
        }
        let pattern = SamplingPattern::new(self.pattern.skews.clone())?;
        let band = self.band().checked()?;
        Ok(DesignProblem::with_ridge(
            pattern,
            band,
            self.filter_order,
            self.ridge,
        )?)
    }

    pub fn signal(&self) -> MultitoneSignal {
        MultitoneSignal::new(
            self.tones
                .iter()
                .map(|t| Tone {
                    amplitude: t.amplitude,
                    phase: t.phase_rad,
                    omega_t1: t.omega_over_pi * PI,
                })
                .collect(),
        )
    }

    /// Cross-checks every field and builds the simulation scenario.
    pub fn scenario(&self) -> CliResult<Scenario> {
        let problem = self.problem()?;
        for (i, t) in self.tones.iter().enumerate() {
            if !(t.amplitude.is_finite() && t.omega_over_pi.is_finite() && t.phase_rad.is_finite()) {
                return Err(CliError::Validation(format!("tone {i} has a non-finite field")));
            }
        }
        if self.noise.enabled && self.noise.snr_db.is_nan() {
            return Err(CliError::Validation("noise.snr_db is NaN".into()));
        }
        let scenario = Scenario {
            problem,
            signal: self.signal(),
            noise: self.noise.enabled.then_some(NoiseSpec {
                snr_db: self.noise.snr_db,
                seed: self.noise.seed,
            }),
            output_len: self.simulation_length,
            fft_len: self.fft_len,
            window: self.window,
            path: self.path,
            coherent: self.coherent,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate_design(&self) -> CliResult<DesignProblem> {
        if self.response_points < 2 {
            return Err(CliError::Validation(
                "response_points must be at least 2".into(),
            ));
        }
        self.problem()
    }
}
