use super::analysis_spectrogram;
use crate::dsp::{AudioClip, FrameConfig};
use crate::error::Result;
use serde::{Deserialize, Serialize};

pub const N_MELS: usize = 128;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Log-compressed mel spectrogram, band-major `[bands x frames]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelSpec {
    pub bands: usize,
    pub frames: usize,
    pub data: Vec<f64>,
}

impl MelSpec {
    pub fn get(&self, band: usize, frame: usize) -> f64 {
        self.data[band * self.frames + frame]
    }
}

/// Triangular filters with unit peaks, equally spaced on the mel scale
/// between 0 Hz and `f_max`. Row-major `[n_mels x bins]`.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32, f_max: f64) -> Vec<f64> {
    let bins = n_fft / 2 + 1;
    let top = hz_to_mel(f_max);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let mut bank = vec![0.0; n_mels * bins];
    for m in 0..n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for b in 0..bins {
            let f = b as f64 * sample_rate as f64 / n_fft as f64;
            let w = if f > lo && f <= mid {
                (f - lo) / (mid - lo)
            } else if f > mid && f < hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            };
            bank[m * bins + b] = w;
        }
    }
    bank
}

/// `log(1 + mel * |STFT|)` with 128 bands covering 0 Hz to Nyquist.
pub fn mel_spectrogram(clip: &AudioClip, cfg: &FrameConfig) -> Result<MelSpec> {
    let spec = analysis_spectrogram(clip, cfg)?.magnitude();
    let bank = mel_filterbank(N_MELS, 2 * (spec.bins - 1), cfg.sample_rate, cfg.nyquist());
    let mut data = vec![0.0; N_MELS * spec.frames];
    for m in 0..N_MELS {
        let weights = &bank[m * spec.bins..(m + 1) * spec.bins];
        for (b, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = &spec.data[b * spec.frames..(b + 1) * spec.frames];
            for (d, v) in data[m * spec.frames..(m + 1) * spec.frames].iter_mut().zip(row) {
                *d += w * v;
            }
        }
    }
    data.iter_mut().for_each(|v| *v = v.ln_1p());
    Ok(MelSpec {
        bands: N_MELS,
        frames: spec.frames,
        data,
    })
}
