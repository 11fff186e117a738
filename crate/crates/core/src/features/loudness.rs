use super::{analysis_spectrogram, ANALYSIS_WINDOW};
use crate::dsp::{AudioClip, FrameConfig};
use crate::error::Result;

pub const LOUDNESS_FLOOR_DB: f64 = -80.0;

/// A-weighting gain in dB (0 dB at 1 kHz).
pub fn a_weighting_db(f: f64) -> f64 {
    if f <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let f2 = f * f;
    let num = 12194.0f64.powi(2) * f2 * f2;
    let den = (f2 + 20.6f64.powi(2))
        * ((f2 + 107.7f64.powi(2)) * (f2 + 737.9f64.powi(2))).sqrt()
        * (f2 + 12194.0f64.powi(2));
    20.0 * (num / den).log10() + 2.0
}

/// One-sided spectral power of a bin-centred full-scale sine under a
/// periodic Hann window of length `n`: `3 n^2 / 32`.
fn full_scale_sine_power(n: usize) -> f64 {
    3.0 * (n * n) as f64 / 32.0
}

/// Per-frame A-weighted power in dB relative to a full-scale sine, clamped to `[-80, 0]`.
pub fn loudness(clip: &AudioClip, cfg: &FrameConfig) -> Result<Vec<f64>> {
    let spec = analysis_spectrogram(clip, cfg)?;
    let n_fft = 2 * (spec.bins - 1);
    let weights: Vec<f64> = (0..spec.bins)
        .map(|b| {
            let db = a_weighting_db(b as f64 * cfg.sample_rate as f64 / n_fft as f64);
            10f64.powf(db / 10.0)
        })
        .collect();
    let reference = 10.0 * full_scale_sine_power(ANALYSIS_WINDOW).log10();
    Ok((0..spec.frames)
        .map(|f| {
            let power: f64 = (0..spec.bins)
                .map(|b| weights[b] * spec.get(b, f).norm_sqr())
                .sum();
            (10.0 * (power + 1e-10).log10() - reference).clamp(LOUDNESS_FLOOR_DB, 0.0)
        })
        .collect())
}
