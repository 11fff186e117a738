use super::{analysis_spectrogram, MagnitudeSpec};
use crate::dsp::{AudioClip, FrameConfig};
use crate::error::{config_err, input_err, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpssConfig {
    pub margin: f64,
    /// Odd, in frames.
    pub median_kernel_time: usize,
    /// Odd, in bins.
    pub median_kernel_freq: usize,
}

impl Default for HpssConfig {
    fn default() -> Self {
        Self {
            margin: 8.0,
            median_kernel_time: 17,
            median_kernel_freq: 17,
        }
    }
}

impl HpssConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 1.0) || !self.margin.is_finite() {
            return config_err(format!("HPSS margin must exceed 1, got {}", self.margin));
        }
        for (name, k) in [
            ("time", self.median_kernel_time),
            ("frequency", self.median_kernel_freq),
        ] {
            if k == 0 || k % 2 == 0 {
                return config_err(format!("{name} median kernel must be odd, got {k}"));
            }
        }
        Ok(())
    }
}

/// Binary masks, bin-major like the input spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct HpssMasks {
    pub bins: usize,
    pub frames: usize,
    pub harmonic: Vec<bool>,
    pub percussive: Vec<bool>,
}

/// Symmetric edge reflection `(d c b a | a b c d | d c b a)`.
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn median_1d(line: &[f64], kernel: usize, out: &mut [f64], scratch: &mut Vec<f64>) {
    let half = (kernel / 2) as isize;
    for (i, o) in out.iter_mut().enumerate() {
        scratch.clear();
        scratch.extend((-half..=half).map(|d| line[mirror(i as isize + d, line.len())]));
        let mid = scratch.len() / 2;
        *o = *scratch.select_nth_unstable_by(mid, f64::total_cmp).1;
    }
}

/// Median along the frame axis for every bin.
pub fn median_filter_time(spec: &MagnitudeSpec, kernel: usize) -> MagnitudeSpec {
    let mut data = vec![0.0; spec.data.len()];
    let mut scratch = Vec::with_capacity(kernel);
    for b in 0..spec.bins {
        let r = b * spec.frames..(b + 1) * spec.frames;
        median_1d(&spec.data[r.clone()], kernel, &mut data[r], &mut scratch);
    }
    MagnitudeSpec {
        data,
        ..spec.clone()
    }
}

/// Median along the bin axis for every frame.
pub fn median_filter_freq(spec: &MagnitudeSpec, kernel: usize) -> MagnitudeSpec {
    let mut data = vec![0.0; spec.data.len()];
    let mut scratch = Vec::with_capacity(kernel);
    let mut column = vec![0.0; spec.bins];
    let mut filtered = vec![0.0; spec.bins];
    for f in 0..spec.frames {
        for (b, c) in column.iter_mut().enumerate() {
            *c = spec.get(b, f);
        }
        median_1d(&column, kernel, &mut filtered, &mut scratch);
        for (b, v) in filtered.iter().enumerate() {
            data[b * spec.frames + f] = *v;
        }
    }
    MagnitudeSpec {
        data,
        ..spec.clone()
    }
}

/// Margin-based hard-mask separation of a magnitude spectrogram.
pub fn hpss(spec: &MagnitudeSpec, cfg: &HpssConfig) -> Result<HpssMasks> {
    cfg.validate()?;
    if spec.data.len() != spec.bins * spec.frames {
        return input_err("spectrogram data does not match its shape");
    }
    if spec.data.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return input_err("spectrogram magnitudes must be finite and nonnegative");
    }
    let along_time = median_filter_time(spec, cfg.median_kernel_time);
    let along_freq = median_filter_freq(spec, cfg.median_kernel_freq);
    let harmonic = along_time
        .data
        .iter()
        .zip(&along_freq.data)
        .map(|(h, p)| *h > cfg.margin * p)
        .collect();
    let percussive = along_time
        .data
        .iter()
        .zip(&along_freq.data)
        .map(|(h, p)| *p > cfg.margin * h)
        .collect();
    Ok(HpssMasks {
        bins: spec.bins,
        frames: spec.frames,
        harmonic,
        percussive,
    })
}

/// Energy of the percussive component in each frame.
pub(crate) fn percussive_energy(spec: &MagnitudeSpec, masks: &HpssMasks) -> Vec<f64> {
    let mut e = vec![0.0; spec.frames];
    for b in 0..spec.bins {
        for (f, acc) in e.iter_mut().enumerate() {
            let i = b * spec.frames + f;
            if masks.percussive[i] {
                *acc += spec.data[i] * spec.data[i];
            }
        }
    }
    e
}

/// Only frames with two neighbours on each side are candidates, so the
/// reflect-padded clip edges never produce onsets.
pub(crate) fn pick_onsets(e: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; e.len()];
    if e.len() < 5 {
        return out;
    }
    let candidates = 2..e.len() - 2;
    let max = e[candidates.clone()].iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return out;
    }
    for n in candidates {
        let is_peak = (n - 2..=n + 2).filter(|&m| m != n).all(|m| e[n] > e[m]);
        if is_peak && e[n] > 0.05 * max {
            out[n] = (e[n] / max).sqrt();
        }
    }
    out
}

/// Peaks of percussive frame energy, scaled so the loudest onset is 1.
pub fn onset_vector(clip: &AudioClip, cfg: &FrameConfig, hpss_cfg: &HpssConfig) -> Result<Vec<f64>> {
    let spec = analysis_spectrogram(clip, cfg)?.magnitude();
    let masks = hpss(&spec, hpss_cfg)?;
    Ok(pick_onsets(&percussive_energy(&spec, &masks)))
}
