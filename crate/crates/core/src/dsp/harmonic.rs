use super::{interpolation_weights, upsample_controls, AudioClip, FrameConfig};
use crate::error::{config_err, input_err, Result};
use std::f64::consts::TAU;

/// 1.0 where partial `k` (1-based) of the frame's f0 stays at or below Nyquist, else 0.0.
///
/// Row-major `[frames x n_harmonics]`.
pub fn antialias_mask(f0: &[f64], n_harmonics: usize, sample_rate: u32) -> Vec<f64> {
    let nyquist = sample_rate as f64 / 2.0;
    let mut mask = Vec::with_capacity(f0.len() * n_harmonics);
    for &f in f0 {
        mask.extend((1..=n_harmonics).map(|k| if k as f64 * f > nyquist { 0.0 } else { 1.0 }));
    }
    mask
}

/// Per-frame partial amplitudes `harmonic_amp * H * renorm(mask * distribution)`.
///
/// A frame whose partials are all masked produces a zero row.
pub fn harmonic_partial_amplitudes(
    f0: &[f64],
    harmonic_amp: &[f64],
    distribution: &[f64],
    harmonic_indicator: &[f64],
    cfg: &FrameConfig,
) -> Result<Vec<f64>> {
    let frames = cfg.frame_count;
    cfg.check_frames("f0", f0.len())?;
    cfg.check_frames("harmonic_amp", harmonic_amp.len())?;
    cfg.check_frames("harmonic indicator", harmonic_indicator.len())?;
    if distribution.is_empty() || !distribution.len().is_multiple_of(frames) {
        return config_err("harmonic_distribution is not [frames x harmonics]");
    }
    if f0.iter().any(|&f| f < 0.0 || !f.is_finite()) {
        return input_err("f0 must be finite and non-negative");
    }
    if distribution.iter().any(|&d| d < 0.0) {
        return input_err("harmonic distribution must be non-negative");
    }
    let k = distribution.len() / frames;
    let mask = antialias_mask(f0, k, cfg.sample_rate);
    let mut out = vec![0.0; frames * k];
    for n in 0..frames {
        let row = n * k..(n + 1) * k;
        let masked: Vec<f64> = distribution[row.clone()]
            .iter()
            .zip(&mask[row.clone()])
            .map(|(d, m)| d * m)
            .collect();
        let total: f64 = masked.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let gain = harmonic_amp[n] * harmonic_indicator[n] / total;
        for (o, m) in out[row].iter_mut().zip(masked) {
            *o = m * gain;
        }
    }
    Ok(out)
}

/// Additive bank `sum_k a_k[t] * sin(k * phi[t])` with
/// `phi[t] = 2 pi * sum_{m <= t} f0[m] / sr` and both amplitudes and f0
/// interpolated from frame rate.
///
/// `partial_amps` is row-major `[frames x n_harmonics]`.
pub fn oscillator_bank(partial_amps: &[f64], f0: &[f64], cfg: &FrameConfig) -> Result<Vec<f64>> {
    cfg.check_frames("f0", f0.len())?;
    if !partial_amps.len().is_multiple_of(cfg.frame_count) {
        return config_err("partial amplitudes are not [frames x harmonics]");
    }
    let k = partial_amps.len() / cfg.frame_count;
    let active = active_partials(partial_amps, k);
    let f0_up = upsample_controls(f0, cfg)?;
    let weights = interpolation_weights(cfg);
    let mut out = vec![0.0; cfg.len()];
    if active == 0 {
        return Ok(out);
    }
    let sr = cfg.sample_rate as f64;
    let mut phase = 0.0;
    for (t, (o, ip)) in out.iter_mut().zip(&weights).enumerate() {
        phase += TAU * f0_up[t] / sr;
        let lo = &partial_amps[ip.lo * k..ip.lo * k + active];
        let hi = &partial_amps[ip.hi * k..ip.hi * k + active];
        let (s1, c1) = phase.sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut acc = 0.0;
        for (a_lo, a_hi) in lo.iter().zip(hi) {
            let a = (1.0 - ip.w) * a_lo + ip.w * a_hi;
            acc += a * s;
            let next_s = s * c1 + c * s1;
            c = c * c1 - s * s1;
            s = next_s;
        }
        *o = acc;
    }
    Ok(out)
}

/// Number of leading partials that carry any amplitude.
pub(crate) fn active_partials(partial_amps: &[f64], k: usize) -> usize {
    let mut active = 0;
    for row in partial_amps.chunks(k) {
        if let Some(last) = row.iter().rposition(|&a| a != 0.0) {
            active = active.max(last + 1);
        }
    }
    active
}

/// Harmonic branch: anti-aliased, indicator-gated additive synthesis.
pub fn harmonic_synth(
    f0: &[f64],
    harmonic_amp: &[f64],
    distribution: &[f64],
    harmonic_indicator: &[f64],
    cfg: &FrameConfig,
) -> Result<AudioClip> {
    let amps = harmonic_partial_amplitudes(f0, harmonic_amp, distribution, harmonic_indicator, cfg)?;
    AudioClip::new(oscillator_bank(&amps, f0, cfg)?, cfg.sample_rate)
}
