//! Signal generators driven by per-frame control parameters.
//!
//! Three branches are summed into one clip: an additive harmonic bank with
//! cumulative phase, filtered noise shaped by a band-magnitude envelope, and
//! a transient channel built by inverting a sinusoid laid out in the DCT
//! domain. Everything here works on plain `f64` slices; the `autodiff`
//! module mirrors the same maths on the tape for training.

mod dct;
mod harmonic;
mod noise;
mod transient;
mod upsample;

pub use dct::{dct2_ortho, dct3_ortho, DctTable};
pub use harmonic::{
    antialias_mask, harmonic_partial_amplitudes, harmonic_synth, oscillator_bank,
};
pub use noise::{frame_convolve, noise_filter_basis, noise_synth, white_noise};
pub use transient::{transient_frame, transient_synth};
pub use upsample::{interpolation_weights, upsample_controls, Interp};

use crate::error::{config_err, input_err, Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_FRAME_SIZE: usize = 160;
pub const DEFAULT_FRAME_COUNT: usize = 400;

/// Frame layout shared by analysis and synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub frame_size: usize,
    pub frame_count: usize,
    pub sample_rate: u32,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            frame_size: DEFAULT_FRAME_SIZE,
            frame_count: DEFAULT_FRAME_COUNT,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

impl FrameConfig {
    pub fn new(frame_size: usize, frame_count: usize, sample_rate: u32) -> Result<Self> {
        let cfg = Self {
            frame_size,
            frame_count,
            sample_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_size == 0 || self.frame_count == 0 || self.sample_rate == 0 {
            return config_err(format!("degenerate frame config {self:?}"));
        }
        Ok(())
    }

    /// Clip length in samples.
    pub fn len(&self) -> usize {
        self.frame_size * self.frame_count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    /// Taps of the per-frame noise filter.
    pub fn noise_taps(&self) -> usize {
        2 * self.frame_size
    }

    pub(crate) fn check_frames(&self, what: &str, len: usize) -> Result<()> {
        if len != self.frame_count {
            return config_err(format!(
                "{what}: expected {} frames, got {len}",
                self.frame_count
            ));
        }
        Ok(())
    }
}

/// Fixed-length mono signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Numeric(format!("non-finite sample at index {i}")));
        }
        if sample_rate == 0 {
            return config_err("sample rate must be positive");
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(cfg: &FrameConfig) -> Self {
        Self {
            samples: vec![0.0; cfg.len()],
            sample_rate: cfg.sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    pub fn check_config(&self, cfg: &FrameConfig) -> Result<()> {
        if self.samples.len() != cfg.len() {
            return input_err(format!(
                "clip has {} samples, expected {}",
                self.samples.len(),
                cfg.len()
            ));
        }
        if self.sample_rate != cfg.sample_rate {
            return input_err(format!(
                "clip sample rate {} does not match {}",
                self.sample_rate, cfg.sample_rate
            ));
        }
        Ok(())
    }
}

/// Per-frame decoder outputs that drive the three synthesizers.
///
/// Matrices are row-major with one row per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_harmonics: usize,
    pub n_bands: usize,
    pub harmonic_amp: Vec<f64>,
    pub harmonic_distribution: Vec<f64>,
    pub noise_bands: Vec<f64>,
    pub transient_freq: Vec<f64>,
    pub transient_amp: Vec<f64>,
}

impl SynthParams {
    pub fn zeros(frames: usize, n_harmonics: usize, n_bands: usize) -> Self {
        Self {
            n_harmonics,
            n_bands,
            harmonic_amp: vec![0.0; frames],
            harmonic_distribution: vec![0.0; frames * n_harmonics],
            noise_bands: vec![0.0; frames * n_bands],
            transient_freq: vec![0.0; frames],
            transient_amp: vec![0.0; frames],
        }
    }

    pub fn frames(&self) -> usize {
        self.harmonic_amp.len()
    }

    pub fn validate(&self, cfg: &FrameConfig) -> Result<()> {
        let n = cfg.frame_count;
        cfg.check_frames("harmonic_amp", self.harmonic_amp.len())?;
        cfg.check_frames("transient_freq", self.transient_freq.len())?;
        cfg.check_frames("transient_amp", self.transient_amp.len())?;
        if self.harmonic_distribution.len() != n * self.n_harmonics {
            return config_err("harmonic_distribution shape mismatch");
        }
        if self.noise_bands.len() != n * self.n_bands {
            return config_err("noise_bands shape mismatch");
        }
        let all = self
            .harmonic_amp
            .iter()
            .chain(&self.harmonic_distribution)
            .chain(&self.noise_bands)
            .chain(&self.transient_freq)
            .chain(&self.transient_amp);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite synth parameter".into()));
        }
        Ok(())
    }
}

/// Sum of the three synthesizer branches. No clipping is applied.
pub fn render(
    params: &SynthParams,
    f0: &[f64],
    harmonic_indicator: &[f64],
    cfg: &FrameConfig,
    seed: u64,
) -> Result<AudioClip> {
    params.validate(cfg)?;
    let harmonic = harmonic_synth(
        f0,
        &params.harmonic_amp,
        &params.harmonic_distribution,
        harmonic_indicator,
        cfg,
    )?;
    let noise = noise_synth(&params.noise_bands, params.n_bands, cfg, seed)?;
    let transient = transient_synth(&params.transient_freq, &params.transient_amp, cfg)?;
    let samples = harmonic
        .samples()
        .iter()
        .zip(noise.samples())
        .zip(transient.samples())
        .map(|((h, n), t)| h + n + t)
        .collect();
    AudioClip::new(samples, cfg.sample_rate)
}
