use super::{AudioClip, FrameConfig};
use crate::error::{config_err, input_err, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

/// Seeded uniform white noise in `[-1, 1)`.
pub fn white_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Linear map from band magnitudes to a centered, Hann-windowed zero-phase FIR.
///
/// Returns a row-major `[taps x n_bands]` matrix: the impulse response of a
/// frame is `basis * bands`. Band magnitudes are linearly interpolated onto
/// the `taps / 2 + 1` real-FFT bins (band 0 at DC, the last band at Nyquist)
/// before the inverse transform.
pub fn noise_filter_basis(taps: usize, n_bands: usize) -> Vec<f64> {
    assert!(taps >= 2 && taps.is_multiple_of(2), "noise filter needs an even tap count");
    let bins = taps / 2 + 1;
    let nf = taps as f64;
    // bin_from_band[j][b]
    let mut interp = vec![0.0; bins * n_bands];
    for j in 0..bins {
        if n_bands == 1 {
            interp[j] = 1.0;
            continue;
        }
        let pos = j as f64 * (n_bands - 1) as f64 / (bins - 1) as f64;
        let lo = (pos.floor() as usize).min(n_bands - 1);
        let w = pos - lo as f64;
        interp[j * n_bands + lo] += 1.0 - w;
        if w > 0.0 {
            interp[j * n_bands + lo + 1] += w;
        }
    }
    let mut basis = vec![0.0; taps * n_bands];
    for i in 0..taps {
        // zero lag lands on the window peak at taps / 2
        let lag = (i as isize - (taps / 2) as isize).rem_euclid(taps as isize) as f64;
        let window = 0.5 - 0.5 * (TAU * i as f64 / nf).cos();
        for j in 0..bins {
            let weight = if j == 0 || j == bins - 1 { 1.0 } else { 2.0 };
            let c = if j == bins - 1 {
                (PI * lag).cos()
            } else {
                (TAU * j as f64 * lag / nf).cos()
            };
            let k = window * weight * c / nf;
            if k == 0.0 {
                continue;
            }
            for b in 0..n_bands {
                basis[i * n_bands + b] += k * interp[j * n_bands + b];
            }
        }
    }
    basis
}

/// Overlap-add of per-frame FIR filtering.
///
/// Frame `n` filters its own `frame_size` noise samples with row `n` of
/// `irs` (`[frames x taps]`); the centered filter delay of `taps / 2` is
/// compensated and the result is cropped to the clip length.
pub fn frame_convolve(irs: &[f64], source: &[f64], cfg: &FrameConfig) -> Result<Vec<f64>> {
    if !irs.len().is_multiple_of(cfg.frame_count) || source.len() != cfg.len() {
        return config_err("frame_convolve shape mismatch");
    }
    let taps = irs.len() / cfg.frame_count;
    let fs = cfg.frame_size;
    let delay = taps / 2;
    let len = cfg.len() as isize;
    let mut out = vec![0.0; cfg.len()];
    for (n, ir) in irs.chunks(taps).enumerate() {
        if ir.iter().all(|&h| h == 0.0) {
            continue;
        }
        let start = (n * fs) as isize - delay as isize;
        for j in 0..fs {
            let x = source[n * fs + j];
            let base = start + j as isize;
            let lo = (-base).max(0) as usize;
            let hi = ((len - base).max(0) as usize).min(taps);
            for i in lo..hi {
                out[(base + i as isize) as usize] += x * ir[i];
            }
        }
    }
    Ok(out)
}

/// Per-frame impulse responses `[frames x taps]` for row-major band magnitudes.
pub(crate) fn band_irs(bands: &[f64], n_bands: usize, basis: &[f64], taps: usize) -> Vec<f64> {
    let frames = bands.len() / n_bands;
    let mut irs = vec![0.0; frames * taps];
    for (row, ir) in bands.chunks(n_bands).zip(irs.chunks_mut(taps)) {
        if row.iter().all(|&b| b == 0.0) {
            continue;
        }
        for (i, h) in ir.iter_mut().enumerate() {
            *h = basis[i * n_bands..(i + 1) * n_bands]
                .iter()
                .zip(row)
                .map(|(m, b)| m * b)
                .sum();
        }
    }
    irs
}

/// Filtered-noise branch. `noise_bands` is row-major `[frames x n_bands]`.
pub fn noise_synth(
    noise_bands: &[f64],
    n_bands: usize,
    cfg: &FrameConfig,
    seed: u64,
) -> Result<AudioClip> {
    if n_bands == 0 || noise_bands.len() != cfg.frame_count * n_bands {
        return config_err("noise_bands is not [frames x bands]");
    }
    if noise_bands.iter().any(|&b| b < 0.0 || !b.is_finite()) {
        return input_err("noise band magnitudes must be finite and non-negative");
    }
    let taps = cfg.noise_taps();
    let basis = noise_filter_basis(taps, n_bands);
    let irs = band_irs(noise_bands, n_bands, &basis, taps);
    let source = white_noise(cfg.len(), seed);
    AudioClip::new(frame_convolve(&irs, &source, cfg)?, cfg.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};

    #[test]
    fn flat_envelope_is_a_unit_impulse() {
        let basis = noise_filter_basis(16, 3);
        let ir = band_irs(&[1.0, 1.0, 1.0], 3, &basis, 16);
        for (i, h) in ir.iter().enumerate() {
            let expect = if i == 8 { 1.0 } else { 0.0 };
            assert!((h - expect).abs() < 1e-12, "{ir:?}");
        }
    }

    #[test]
    fn zero_bands_silent() {
        let cfg = FrameConfig::default();
        let out = noise_synth(&vec![0.0; 400 * 100], 100, &cfg, 3).unwrap();
        assert!(out.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn rms_scales_linearly() {
        let cfg = FrameConfig::default();
        let a = noise_synth(&vec![0.3; 400 * 100], 100, &cfg, 11).unwrap();
        let b = noise_synth(&vec![0.6; 400 * 100], 100, &cfg, 11).unwrap();
        assert!((b.rms() / a.rms() - 2.0).abs() < 1e-12);
        assert!(a.rms() > 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = FrameConfig::new(160, 10, 16_000).unwrap();
        let bands = vec![0.5; 10 * 100];
        let a = noise_synth(&bands, 100, &cfg, 5).unwrap();
        let b = noise_synth(&bands, 100, &cfg, 5).unwrap();
        let c = noise_synth(&bands, 100, &cfg, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn lowest_band_is_lowpass() {
        let cfg = FrameConfig::default();
        let mut bands = vec![0.0; 400 * 100];
        for n in 0..400 {
            bands[n * 100] = 1.0;
        }
        let out = noise_synth(&bands, 100, &cfg, 1).unwrap();
        let mut buf: Vec<Complex<f64>> = out.samples().iter().map(|&s| Complex::new(s, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        let half = buf.len() / 2;
        let cutoff = 800 * buf.len() / 16_000;
        let total: f64 = buf[..=half].iter().map(|c| c.norm_sqr()).sum();
        let low: f64 = buf[..cutoff].iter().map(|c| c.norm_sqr()).sum();
        assert!(low / total >= 0.8, "low-band share {}", low / total);
    }

    #[test]
    fn rejects_negative_magnitudes() {
        let cfg = FrameConfig::new(4, 2, 16_000).unwrap();
        assert!(noise_synth(&[0.0, -0.1, 0.0, 0.0], 2, &cfg, 0).is_err());
    }
}
