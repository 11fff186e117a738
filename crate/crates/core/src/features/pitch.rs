use super::ANALYSIS_WINDOW;
use crate::dsp::{AudioClip, FrameConfig};
use crate::error::Result;
use crate::spectral::reflect_index;
use serde::{Deserialize, Serialize};

/// Per-frame fundamental frequency and estimator confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    /// Hz, 0 on unvoiced frames.
    pub f0: Vec<f64>,
    /// In `[0, 1]`.
    pub confidence: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YinConfig {
    pub window: usize,
    pub threshold: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for YinConfig {
    fn default() -> Self {
        Self {
            window: ANALYSIS_WINDOW,
            threshold: 0.3,
            f_min: 40.0,
            f_max: 2000.0,
        }
    }
}

struct Estimate {
    f0: f64,
    confidence: f64,
}

fn yin_frame(frame: &[f64], tau_min: usize, tau_max: usize, sr: f64, threshold: f64) -> Estimate {
    let w = frame.len() - tau_max;
    let energy: f64 = frame.iter().map(|x| x * x).sum();
    if energy <= 1e-20 {
        return Estimate {
            f0: 0.0,
            confidence: 0.0,
        };
    }
    // difference function and its cumulative-mean normalization
    let mut cmnd = vec![1.0; tau_max + 1];
    let mut running = 0.0;
    for tau in 1..=tau_max {
        let d: f64 = frame[..w]
            .iter()
            .zip(&frame[tau..tau + w])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        running += d;
        cmnd[tau] = if running > 0.0 {
            d * tau as f64 / running
        } else {
            1.0
        };
    }
    let search = tau_min..=tau_max;
    let mut chosen = None;
    let mut tau = tau_min;
    while tau <= tau_max {
        if cmnd[tau] < threshold {
            while tau < tau_max && cmnd[tau + 1] < cmnd[tau] {
                tau += 1;
            }
            chosen = Some(tau);
            break;
        }
        tau += 1;
    }
    let Some(tau) = chosen else {
        let best = search
            .map(|t| cmnd[t])
            .fold(f64::INFINITY, f64::min);
        return Estimate {
            f0: 0.0,
            confidence: (1.0 - best).clamp(0.0, 1.0),
        };
    };
    let refined = if tau > 1 && tau < tau_max {
        let (a, b, c) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
        let den = a - 2.0 * b + c;
        if den.abs() > 1e-12 {
            tau as f64 + (0.5 * (a - c) / den).clamp(-1.0, 1.0)
        } else {
            tau as f64
        }
    } else {
        tau as f64
    };
    Estimate {
        f0: sr / refined,
        confidence: (1.0 - cmnd[tau]).clamp(0.0, 1.0),
    }
}

/// YIN estimator on frames centred every `frame_size` samples.
pub fn pitch_track(clip: &AudioClip, cfg: &FrameConfig) -> Result<PitchTrack> {
    pitch_track_with(clip, cfg, &YinConfig::default())
}

pub fn pitch_track_with(clip: &AudioClip, cfg: &FrameConfig, yin: &YinConfig) -> Result<PitchTrack> {
    clip.check_config(cfg)?;
    let sr = cfg.sample_rate as f64;
    let tau_min = (sr / yin.f_max).ceil().max(2.0) as usize;
    let tau_max = ((sr / yin.f_min).floor() as usize).min(yin.window / 2);
    let x = clip.samples();
    let half = (yin.window / 2) as isize;
    let mut frame = vec![0.0; yin.window];
    let mut f0 = Vec::with_capacity(cfg.frame_count);
    let mut confidence = Vec::with_capacity(cfg.frame_count);
    for n in 0..cfg.frame_count {
        let start = (n * cfg.frame_size) as isize - half;
        for (i, v) in frame.iter_mut().enumerate() {
            *v = x[reflect_index(start + i as isize, x.len())];
        }
        let est = yin_frame(&frame, tau_min, tau_max, sr, yin.threshold);
        f0.push(est.f0);
        confidence.push(est.confidence);
    }
    Ok(PitchTrack { f0, confidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::white_noise;
    use std::f64::consts::TAU;

    #[test]
    fn tracks_a_440_tone() {
        let cfg = FrameConfig::default();
        let x = (0..64_000)
            .map(|t| 0.5 * (TAU * 440.0 * t as f64 / 16_000.0).sin())
            .collect();
        let p = pitch_track(&AudioClip::new(x, 16_000).unwrap(), &cfg).unwrap();
        for n in 5..395 {
            assert!((p.f0[n] - 440.0).abs() < 2.0, "frame {n}: {}", p.f0[n]);
            assert!(p.confidence[n] > 0.9);
        }
    }

    #[test]
    fn noise_has_low_confidence() {
        let cfg = FrameConfig::default();
        let clip = AudioClip::new(white_noise(64_000, 9), 16_000).unwrap();
        let mut c = pitch_track(&clip, &cfg).unwrap().confidence;
        c.sort_by(f64::total_cmp);
        assert!(c[200] < 0.4, "median confidence {}", c[200]);
    }

    #[test]
    fn silence_has_zero_confidence() {
        let cfg = FrameConfig::default();
        let p = pitch_track(&AudioClip::silence(&cfg), &cfg).unwrap();
        assert!(p.confidence.iter().all(|&c| c == 0.0));
        assert!(p.f0.iter().all(|&f| f == 0.0));
    }
}
