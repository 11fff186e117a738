//! Short-time Fourier transform shared by analysis, losses and metrics.

use crate::error::{input_err, Result};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (TAU * i as f64 / len as f64).cos())
        .collect()
}

/// Mirror an out-of-range index back into `[0, len)` without repeating the edge sample.
pub fn reflect_index(i: isize, len: usize) -> usize {
    let n = len as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - j;
    }
    j as usize
}

/// Frames produced for a signal: frame `f` is centered on sample `f * hop`.
pub fn frame_count(len: usize, hop: usize) -> usize {
    len.div_ceil(hop)
}

/// Complex short-time spectrum, frames-major.
#[derive(Debug, Clone)]
pub struct StftFrames {
    pub frames: usize,
    pub bins: usize,
    pub n_fft: usize,
    pub hop: usize,
    /// Analysis window zero-padded (centered) to `n_fft`.
    pub window: Vec<f64>,
    /// `[frames x bins]`
    pub data: Vec<Complex64>,
}

impl StftFrames {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm()).collect()
    }
}

/// Centered STFT with reflect padding and a periodic Hann window.
pub fn stft_frames(signal: &[f64], window: usize, hop: usize, n_fft: usize) -> Result<StftFrames> {
    if signal.is_empty() {
        return input_err("stft of an empty signal");
    }
    if hop == 0 || window == 0 || window > n_fft {
        return input_err(format!(
            "stft needs hop > 0 and 0 < window <= fft size (window {window}, hop {hop}, fft {n_fft})"
        ));
    }
    let mut padded_window = vec![0.0; n_fft];
    let left = (n_fft - window) / 2;
    padded_window[left..left + window].copy_from_slice(&hann(window));

    let frames = frame_count(signal.len(), hop);
    let bins = n_fft / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut data = Vec::with_capacity(frames * bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    let half = (n_fft / 2) as isize;
    for f in 0..frames {
        let start = (f * hop) as isize - half;
        for (t, b) in buf.iter_mut().enumerate() {
            let w = padded_window[t];
            let x = if w == 0.0 {
                0.0
            } else {
                signal[reflect_index(start + t as isize, signal.len())]
            };
            *b = Complex64::new(w * x, 0.0);
        }
        fft.process(&mut buf);
        data.extend_from_slice(&buf[..bins]);
    }
    Ok(StftFrames {
        frames,
        bins,
        n_fft,
        hop,
        window: padded_window,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_matches_numpy_reflect_mode() {
        let idx: Vec<usize> = (-3..8).map(|i| reflect_index(i, 5)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1]);
    }

    #[test]
    fn frame_layout() {
        let s = stft_frames(&vec![0.0; 64_000], 1024, 160, 1024).unwrap();
        assert_eq!((s.frames, s.bins), (400, 513));
        assert!(s.data.iter().all(|c| c.norm() == 0.0));
    }
}
