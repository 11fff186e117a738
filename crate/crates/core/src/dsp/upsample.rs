use super::FrameConfig;
use crate::error::{input_err, Result};

/// Linear interpolation coordinates of one output sample: `(1 - w) * v[lo] + w * v[hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interp {
    pub lo: usize,
    pub hi: usize,
    pub w: f64,
}

/// Interpolation coordinates for every sample of a clip.
///
/// Frame `n` covers samples `[n * frame_size, (n + 1) * frame_size)` and its
/// value sits at the frame center. Samples before the first center or after
/// the last one hold the end values.
pub fn interpolation_weights(cfg: &FrameConfig) -> Vec<Interp> {
    let fs = cfg.frame_size as f64;
    let last = cfg.frame_count - 1;
    let half = (fs - 1.0) / 2.0;
    (0..cfg.len())
        .map(|i| {
            let pos = (i as f64 - half) / fs;
            if pos <= 0.0 {
                Interp { lo: 0, hi: 0, w: 0.0 }
            } else if pos >= last as f64 {
                Interp {
                    lo: last,
                    hi: last,
                    w: 0.0,
                }
            } else {
                let lo = pos.floor() as usize;
                Interp {
                    lo,
                    hi: lo + 1,
                    w: pos - lo as f64,
                }
            }
        })
        .collect()
}

/// Control-rate to audio-rate conversion by piecewise-linear interpolation
/// between frame centers.
pub fn upsample_controls(values: &[f64], cfg: &FrameConfig) -> Result<Vec<f64>> {
    cfg.check_frames("upsample_controls", values.len())?;
    if values.iter().any(|v| !v.is_finite()) {
        return input_err("upsample_controls: non-finite control value");
    }
    Ok(interpolation_weights(cfg)
        .into_iter()
        .map(|ip| (1.0 - ip.w) * values[ip.lo] + ip.w * values[ip.hi])
        .collect())
}
