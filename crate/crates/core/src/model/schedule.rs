use super::TrainConfig;
use crate::error::{input_err, Result};

fn progress(step: u64, cfg: &TrainConfig) -> Result<f64> {
    if step > cfg.total_steps {
        return input_err(format!("step {step} beyond total_steps {}", cfg.total_steps));
    }
    Ok(step as f64 / cfg.total_steps as f64)
}

/// KL weight: zero, then a linear ramp from `beta_start` to `beta_end`, then held.
pub fn beta_schedule(step: u64, cfg: &TrainConfig) -> Result<f64> {
    let p = progress(step, cfg)?;
    Ok(if p < cfg.beta_activate_at {
        0.0
    } else if p < cfg.beta_ramp_until {
        let t = (p - cfg.beta_activate_at) / (cfg.beta_ramp_until - cfg.beta_activate_at);
        cfg.beta_start + t * (cfg.beta_end - cfg.beta_start)
    } else {
        cfg.beta_end
    })
}

/// Log-linear decay from `lr_start` to `lr_end`, then held.
pub fn lr_schedule(step: u64, cfg: &TrainConfig) -> Result<f64> {
    let p = progress(step, cfg)?;
    let e = p / cfg.lr_decay_until;
    Ok(if e <= 0.0 {
        cfg.lr_start
    } else if e >= 1.0 {
        cfg.lr_end
    } else {
        cfg.lr_start * (cfg.lr_end / cfg.lr_start).powf(e)
    })
}
