//! Conditioning features computed from a clip.
//!
//! All analysis uses a 1024-sample Hann window with a hop equal to the
//! synthesis frame size, which yields exactly one feature frame per
//! synthesis frame.

mod hpss;
mod loudness;
mod mel;
mod pitch;

pub use hpss::{hpss, median_filter_freq, median_filter_time, onset_vector, HpssConfig, HpssMasks};
pub use loudness::{a_weighting_db, loudness, LOUDNESS_FLOOR_DB};
pub use mel::{mel_filterbank, mel_spectrogram, MelSpec, N_MELS};
pub use pitch::{pitch_track, PitchTrack, YinConfig};

use crate::dsp::{AudioClip, FrameConfig};
use crate::error::{input_err, Result};
use crate::spectral::stft_frames;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Analysis window and FFT size.
pub const ANALYSIS_WINDOW: usize = 1024;

/// Complex spectrogram, bin-major `[bins x frames]`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub bins: usize,
    pub frames: usize,
    pub data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[bin * self.frames + frame]
    }

    pub fn magnitude(&self) -> MagnitudeSpec {
        MagnitudeSpec {
            bins: self.bins,
            frames: self.frames,
            data: self.data.iter().map(|c| c.norm()).collect(),
        }
    }
}

/// Real spectrogram, bin-major `[bins x frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpec {
    pub bins: usize,
    pub frames: usize,
    pub data: Vec<f64>,
}

impl MagnitudeSpec {
    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.data[bin * self.frames + frame]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }
}

/// Centered, reflect-padded Hann STFT of shape `[fft_size / 2 + 1 x frames]`.
pub fn stft(clip: &AudioClip, window: usize, hop: usize, fft_size: usize) -> Result<Spectrogram> {
    let frames = stft_frames(clip.samples(), window, hop, fft_size)?;
    let mut data = vec![Complex64::new(0.0, 0.0); frames.data.len()];
    for f in 0..frames.frames {
        for b in 0..frames.bins {
            data[b * frames.frames + f] = frames.data[f * frames.bins + b];
        }
    }
    Ok(Spectrogram {
        bins: frames.bins,
        frames: frames.frames,
        data,
    })
}

pub(crate) fn analysis_spectrogram(clip: &AudioClip, cfg: &FrameConfig) -> Result<Spectrogram> {
    clip.check_config(cfg)?;
    stft(clip, ANALYSIS_WINDOW, cfg.frame_size, ANALYSIS_WINDOW)
}

/// `H = 1 / (1 + exp(-10 (C - 0.7)))` for each confidence value.
pub fn harmonic_indicator(confidence: &[f64]) -> Result<Vec<f64>> {
    if let Some(c) = confidence.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return input_err(format!("confidence {c} outside [0, 1]"));
    }
    Ok(confidence
        .iter()
        .map(|&c| 1.0 / (1.0 + (-10.0 * (c - 0.7)).exp()))
        .collect())
}

/// Per-frame conditioning for the decoder and synthesizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlFrames {
    pub f0: Vec<f64>,
    pub loudness: Vec<f64>,
    pub onset: Vec<f64>,
    /// Harmonic indicator `H`.
    pub harmonic: Vec<f64>,
    /// Latent timbre per frame, absent until encoded or supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
}

impl ControlFrames {
    pub fn frames(&self) -> usize {
        self.f0.len()
    }

    pub fn validate(&self, cfg: &FrameConfig) -> Result<()> {
        cfg.check_frames("f0", self.f0.len())?;
        cfg.check_frames("loudness", self.loudness.len())?;
        cfg.check_frames("onset", self.onset.len())?;
        cfg.check_frames("harmonic indicator", self.harmonic.len())?;
        if let Some(z) = &self.z {
            cfg.check_frames("z", z.len())?;
        }
        let all = self
            .f0
            .iter()
            .chain(&self.loudness)
            .chain(&self.onset)
            .chain(&self.harmonic)
            .chain(self.z.iter().flatten());
        if all.clone().any(|v| !v.is_finite()) {
            return input_err("control frames contain non-finite values");
        }
        if self.f0.iter().any(|&f| f < 0.0) {
            return input_err("negative f0 in control frames");
        }
        Ok(())
    }
}

/// Everything the model needs from one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub pitch: PitchTrack,
    pub controls: ControlFrames,
    pub mel: MelSpec,
}

/// Pitch, indicator, loudness, onsets and mel spectrogram in one pass.
pub fn analyze(clip: &AudioClip, cfg: &FrameConfig) -> Result<Analysis> {
    clip.check_config(cfg)?;
    let pitch = pitch_track(clip, cfg)?;
    let harmonic = harmonic_indicator(&pitch.confidence)?;
    let loudness = loudness(clip, cfg)?;
    let onset = onset_vector(clip, cfg, &HpssConfig::default())?;
    let mel = mel_spectrogram(clip, cfg)?;
    let controls = ControlFrames {
        f0: pitch.f0.clone(),
        loudness,
        onset,
        harmonic,
        z: None,
    };
    Ok(Analysis {
        pitch,
        controls,
        mel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn indicator_anchors() {
        let h = harmonic_indicator(&[0.7, 1.0, 0.0]).unwrap();
        assert_eq!(h[0], 0.5);
        assert!((h[1] - 1.0 / (1.0 + (-3.0f64).exp())).abs() < 1e-15);
        assert!((h[1] - 0.952_574).abs() < 1e-6);
        assert!((h[2] - 0.000_911).abs() < 1e-6);
        assert!(harmonic_indicator(&[1.01]).is_err());
        assert!(harmonic_indicator(&[-0.01]).is_err());
    }

    #[test]
    fn stft_of_silence_is_zero() {
        let clip = AudioClip::new(vec![0.0; 4096], 16_000).unwrap();
        let s = stft(&clip, 1024, 256, 1024).unwrap();
        assert_eq!((s.bins, s.frames), (513, 16));
        assert!(s.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn stft_peak_bin_for_1khz() {
        let x: Vec<f64> = (0..16_000).map(|t| (TAU * 1000.0 * t as f64 / 16_000.0).sin()).collect();
        let s = stft(&AudioClip::new(x, 16_000).unwrap(), 1024, 256, 1024).unwrap();
        let f = s.frames / 2;
        let peak = (0..s.bins)
            .max_by(|&a, &b| s.get(a, f).norm().total_cmp(&s.get(b, f).norm()))
            .unwrap();
        assert_eq!(peak, 64);
    }

    #[test]
    fn stft_rejects_bad_arguments() {
        let clip = AudioClip::new(vec![0.0; 100], 16_000).unwrap();
        assert!(stft(&clip, 64, 0, 64).is_err());
        assert!(stft(&clip, 128, 16, 64).is_err());
        let empty = AudioClip::new(vec![], 16_000).unwrap();
        assert!(stft(&empty, 64, 16, 64).is_err());
    }
}
