use super::{AudioClip, DctTable, FrameConfig};
use crate::error::{input_err, Result};
use std::f64::consts::TAU;

/// One transient window: orthonormal IDCT of `amp * sin(2 pi freq k)`, `k = 0..len`.
pub fn transient_frame(freq: f64, amp: f64, table: &DctTable, out: &mut [f64]) {
    let coeffs: Vec<f64> = (0..table.len())
        .map(|k| amp * (TAU * freq * k as f64).sin())
        .collect();
    table.inverse(&coeffs, out);
}

/// Transient branch. Each frame is one non-overlapping window of
/// `frame_size` samples; `freq` is in cycles per DCT coefficient, `[0, 0.5)`.
pub fn transient_synth(freq: &[f64], amp: &[f64], cfg: &FrameConfig) -> Result<AudioClip> {
    cfg.check_frames("transient_freq", freq.len())?;
    cfg.check_frames("transient_amp", amp.len())?;
    if let Some(f) = freq.iter().find(|&&f| !(0.0..0.5).contains(&f)) {
        return input_err(format!("transient frequency {f} outside [0, 0.5)"));
    }
    if amp.iter().any(|&a| a < 0.0 || !a.is_finite()) {
        return input_err("transient amplitude must be finite and non-negative");
    }
    let fs = cfg.frame_size;
    let table = DctTable::new(fs);
    let mut out = vec![0.0; cfg.len()];
    for (n, chunk) in out.chunks_mut(fs).enumerate() {
        if amp[n] == 0.0 {
            continue;
        }
        transient_frame(freq[n], amp[n], &table, chunk);
    }
    AudioClip::new(out, cfg.sample_rate)
}
