use super::loss::{kl_loss_var, multiscale_stft_loss_var, reparameterize_var};
use super::network::{decode_var, encode_var, Renderer};
use super::{beta_schedule, lr_schedule, Adam, ModelConfig, ParamStore, TrainConfig};
use crate::autodiff::{Tape, Var};
use crate::dsp::{AudioClip, FrameConfig};
use crate::error::{config_err, Error, Result};
use crate::features::{Analysis, ControlFrames, MelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// One clip with its precomputed conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub audio: AudioClip,
    pub mel: MelSpec,
    pub controls: ControlFrames,
}

impl TrainingExample {
    pub fn from_analysis(audio: AudioClip, analysis: Analysis) -> Self {
        Self {
            audio,
            mel: analysis.mel,
            controls: analysis.controls,
        }
    }
}

/// Losses of one step, measured before its update. Also the training log record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub step: u64,
    pub loss: f64,
    pub rec: f64,
    pub reg: f64,
    pub beta: f64,
    pub lr: f64,
}

impl LossReport {
    /// Relative error of `loss` against `rec + beta * reg`.
    pub fn identity_error(&self) -> f64 {
        let expect = self.rec + self.beta * self.reg;
        (self.loss - expect).abs() / expect.abs().max(f64::MIN_POSITIVE)
    }
}

/// Owns the weights and optimizer state for one training run.
pub struct Trainer {
    model: ModelConfig,
    train: TrainConfig,
    params: ParamStore,
    adam: Adam,
    renderer: Renderer,
    step: u64,
    last_checkpoint: Option<u64>,
}

impl Trainer {
    pub fn new(model: ModelConfig, train: TrainConfig, frame: FrameConfig) -> Result<Self> {
        let params = ParamStore::init(&model, train.seed)?;
        Self::with_params(model, train, frame, params)
    }

    pub fn with_params(model: ModelConfig, train: TrainConfig, frame: FrameConfig, params: ParamStore) -> Result<Self> {
        model.validate()?;
        train.validate()?;
        params.check_layout(&model)?;
        let renderer = Renderer::new(frame, model.n_noise_bands)?;
        Ok(Self {
            model,
            train,
            params,
            adam: Adam::default(),
            renderer,
            step: 0,
            last_checkpoint: None,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn model_config(&self) -> &ModelConfig {
        &self.model
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.train.total_steps
    }

    /// Remembers the step of the latest saved checkpoint for error reports.
    pub fn mark_checkpoint(&mut self) {
        self.last_checkpoint = Some(self.step);
    }

    /// Forward pass, one backward pass and one Adam update.
    pub fn train_step(&mut self, batch: &[TrainingExample]) -> Result<LossReport> {
        if batch.is_empty() {
            return config_err("empty batch");
        }
        if self.is_done() {
            return config_err(format!("all {} steps already taken", self.train.total_steps));
        }
        let step = self.step;
        let beta = beta_schedule(step, &self.train)?;
        let lr = lr_schedule(step, &self.train)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.train.seed);
        rng.set_stream(step);

        let tape = Tape::new();
        let bound = self.params.bind(&tape, true);
        let mut recs = Vec::with_capacity(batch.len());
        let mut regs = Vec::with_capacity(batch.len());
        for ex in batch {
            let frames = ex.controls.frames();
            let eps: Vec<f64> = (0..frames).map(|_| rng.sample(StandardNormal)).collect();
            let noise_seed: u64 = rng.gen();
            let (rec, reg) = self.example_loss(&tape, &bound, ex, &eps, noise_seed)?;
            recs.push(rec);
            regs.push(reg);
        }
        let scale = 1.0 / batch.len() as f64;
        let rec = sum_vars(&recs)?.scale(scale);
        let reg = sum_vars(&regs)?.scale(scale);
        let total = rec.add(reg.scale(beta))?;
        let report = LossReport {
            step,
            loss: total.item(),
            rec: rec.item(),
            reg: reg.item(),
            beta,
            lr,
        };
        if !report.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                last_good: self.last_checkpoint,
            });
        }
        let grads = tape.backward(total)?;
        let named = bound.gradients(&grads);
        self.adam.step(&mut self.params, &named, lr)?;
        self.step += 1;
        Ok(report)
    }

    fn example_loss<'t>(
        &self,
        tape: &'t Tape,
        bound: &super::params::BoundParams<'t>,
        ex: &TrainingExample,
        eps: &[f64],
        noise_seed: u64,
    ) -> Result<(Var<'t>, Var<'t>)> {
        let frame = self.renderer.frame();
        ex.audio.check_config(frame)?;
        ex.controls.validate(frame)?;
        let (mu, logvar) = encode_var(tape, bound, &self.model, &ex.mel)?;
        let z = reparameterize_var(mu, logvar, eps)?;
        let decoded = decode_var(tape, bound, &self.model, &ex.controls, z)?;
        let audio = self
            .renderer
            .render(tape, &decoded, &ex.controls.f0, &ex.controls.harmonic, noise_seed)?;
        let rec = multiscale_stft_loss_var(audio, ex.audio.samples())?;
        let reg = kl_loss_var(mu, logvar)?;
        Ok((rec, reg))
    }
}

fn sum_vars<'t>(vars: &[Var<'t>]) -> Result<Var<'t>> {
    let mut acc = vars[0];
    for v in &vars[1..] {
        acc = acc.add(*v)?;
    }
    Ok(acc)
}

