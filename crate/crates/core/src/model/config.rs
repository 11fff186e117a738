use crate::error::{config_err, Result};
use crate::features::N_MELS;
use serde::{Deserialize, Serialize};

/// Network shape. The default is the full profile; [`ModelConfig::desk`]
/// is the small one that trains on a laptop core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_units: usize,
    pub n_harmonics: usize,
    pub n_noise_bands: usize,
    /// Output channels of each encoder conv stack.
    pub encoder_channels: Vec<usize>,
    pub encoder_kernel: usize,
    /// Width of each per-feature decoder input projection.
    pub projection_units: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_units: 1024,
            n_harmonics: 100,
            n_noise_bands: 100,
            encoder_channels: vec![32, 64, 128],
            encoder_kernel: 5,
            projection_units: 64,
        }
    }
}

impl ModelConfig {
    pub fn desk() -> Self {
        Self {
            hidden_units: 64,
            projection_units: 16,
            ..Self::default()
        }
    }

    pub fn mel_bands(&self) -> usize {
        N_MELS
    }

    /// Total width of the decoder output layer.
    pub fn head_width(&self) -> usize {
        1 + self.n_harmonics + self.n_noise_bands + 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 || self.projection_units == 0 {
            return config_err("hidden_units and projection_units must be positive");
        }
        if self.n_harmonics == 0 || self.n_noise_bands < 2 {
            return config_err("need at least one harmonic and two noise bands");
        }
        if self.encoder_channels.is_empty() || self.encoder_channels.contains(&0) {
            return config_err("encoder needs at least one non-empty conv stack");
        }
        if self.encoder_kernel.is_multiple_of(2) {
            return config_err("encoder kernel must be odd");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub total_steps: u64,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Fraction of steps after which the learning rate stays at `lr_end`.
    pub lr_decay_until: f64,
    /// Fraction of steps before which the KL weight is zero.
    pub beta_activate_at: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_ramp_until: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            total_steps: 100_000,
            lr_start: 1e-4,
            lr_end: 1e-5,
            lr_decay_until: 0.8,
            beta_activate_at: 0.1,
            beta_start: 1.0,
            beta_end: 1e3,
            beta_ramp_until: 0.8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn desk() -> Self {
        Self {
            batch_size: 1,
            total_steps: 1000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.total_steps == 0 {
            return config_err("batch_size and total_steps must be positive");
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0) {
            return config_err("learning rates must be positive");
        }
        if !(self.lr_decay_until > 0.0 && self.lr_decay_until <= 1.0) {
            return config_err("lr_decay_until must lie in (0, 1]");
        }
        if !(0.0 < self.beta_activate_at
            && self.beta_activate_at < self.beta_ramp_until
            && self.beta_ramp_until <= 1.0)
        {
            return config_err("need 0 < beta_activate_at < beta_ramp_until <= 1");
        }
        if !(self.beta_start >= 0.0 && self.beta_end >= 0.0) {
            return config_err("beta bounds must be non-negative");
        }
        Ok(())
    }
}
