//! VAE timbre encoder, recurrent decoder, losses, schedules and training.

mod adam;
mod checkpoint;
mod config;
mod loss;
mod network;
mod params;
mod schedule;
mod train;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CheckpointHeader, TensorEntry, CHECKPOINT_MAGIC, CHECKPOINT_SCHEMA};
pub use config::{ModelConfig, TrainConfig};
pub use loss::{
    kl_loss, kl_loss_var, multiscale_stft_loss, multiscale_stft_loss_var, reparameterize,
    reparameterize_var, FFT_SIZES,
};
pub use network::{
    decode_var, encode_var, f0_feature, loudness_feature, scaled_sigmoid, DecodedVars, Renderer,
};
pub use params::{param_layout, BoundParams, ParamStore};
pub use schedule::{beta_schedule, lr_schedule};
pub use train::{LossReport, Trainer, TrainingExample};

use crate::autodiff::{Tape, Tensor};
use crate::dsp::{self, AudioClip, FrameConfig, SynthParams};
use crate::error::{input_err, Result};
use crate::features::{ControlFrames, MelSpec};
use serde::{Deserialize, Serialize};

/// Posterior statistics and the latent drawn from them, one value per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentFrame {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
    pub z: Vec<f64>,
}

/// Immutable weights for inference; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    frame: FrameConfig,
    params: ParamStore,
}

impl Model {
    pub fn new(config: ModelConfig, frame: FrameConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        frame.validate()?;
        params.check_layout(&config)?;
        Ok(Self {
            config,
            frame,
            params,
        })
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        Self::new(ck.model, ck.frame, ck.params)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Encoder statistics with `z` drawn using the given unit-Gaussian noise.
    pub fn encode(&self, mel: &MelSpec, eps: &[f64]) -> Result<LatentFrame> {
        let tape = Tape::new();
        let bound = self.params.bind(&tape, false);
        let (mu, logvar) = encode_var(&tape, &bound, &self.config, mel)?;
        let (mu, logvar) = (mu.value().data().to_vec(), logvar.value().data().to_vec());
        let z = reparameterize(&mu, &logvar, eps)?;
        Ok(LatentFrame { mu, logvar, z })
    }

    /// Synthesizer parameters for complete controls; `z` must be present.
    pub fn decode(&self, ctrl: &ControlFrames) -> Result<SynthParams> {
        ctrl.validate(&self.frame)?;
        let Some(z) = &ctrl.z else {
            return input_err("controls carry no latent z");
        };
        let tape = Tape::new();
        let bound = self.params.bind(&tape, false);
        let z = tape.constant(Tensor::vector(z.clone()));
        Ok(decode_var(&tape, &bound, &self.config, ctrl, z)?.to_params())
    }

    /// Decode and render through the plain synthesizers.
    pub fn render(&self, ctrl: &ControlFrames, noise_seed: u64) -> Result<AudioClip> {
        let params = self.decode(ctrl)?;
        dsp::render(&params, &ctrl.f0, &ctrl.harmonic, &self.frame, noise_seed)
    }
}
