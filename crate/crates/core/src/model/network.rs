use super::params::{BoundParams, DECODER_INPUTS};
use super::ModelConfig;
use crate::autodiff::{Tape, Tensor, Var};
use crate::dsp::{antialias_mask, noise_filter_basis, white_noise, FrameConfig, SynthParams};
use crate::error::{config_err, input_err, Result};
use crate::features::{ControlFrames, MelSpec};
use std::f64::consts::{LN_10, TAU};

const NORM_EPS: f64 = 1e-5;
const LEAK: f64 = 0.01;

/// Decoder input scaling of f0: MIDI note over 127, zero when unvoiced.
pub fn f0_feature(f0: f64) -> f64 {
    if f0 <= 0.0 {
        0.0
    } else {
        ((69.0 + 12.0 * (f0 / 440.0).log2()) / 127.0).clamp(0.0, 1.0)
    }
}

/// Decoder input scaling of loudness: `[-80, 0]` dB onto `[0, 1]`.
pub fn loudness_feature(db: f64) -> f64 {
    ((db + 80.0) / 80.0).clamp(0.0, 1.0)
}

/// `2 * sigmoid(x)^ln(10) + 1e-7`.
pub fn scaled_sigmoid(v: Var<'_>) -> Var<'_> {
    v.sigmoid().powf(LN_10).scale(2.0).offset(1e-7)
}

fn column<'t>(tape: &'t Tape, values: Vec<f64>) -> Var<'t> {
    let n = values.len();
    tape.constant(Tensor::from_parts(vec![n, 1], values))
}

/// Per-channel normalisation over time with a learned scale and shift.
fn time_norm<'t>(x: Var<'t>, scale: Var<'t>, shift: Var<'t>) -> Result<Var<'t>> {
    let c = x.value().rows();
    let mean = x.mean_last().reshape(&[c, 1])?;
    let centered = x.sub(mean)?;
    let var = centered.square().mean_last().reshape(&[c, 1])?;
    centered.div(var.offset(NORM_EPS).sqrt())?.mul(scale)?.add(shift)
}

/// Conv stacks over the mel spectrogram, then a per-frame linear map to
/// `(mu, logvar)`, each `[frames]`.
pub fn encode_var<'t>(
    tape: &'t Tape,
    params: &BoundParams<'t>,
    cfg: &ModelConfig,
    mel: &MelSpec,
) -> Result<(Var<'t>, Var<'t>)> {
    if mel.bands != cfg.mel_bands() || mel.data.len() != mel.bands * mel.frames {
        return config_err(format!(
            "mel spectrogram is {}x{}, encoder expects {} bands",
            mel.bands,
            mel.frames,
            cfg.mel_bands()
        ));
    }
    let frames = mel.frames;
    let mut h = tape.constant(Tensor::new(vec![mel.bands, frames], mel.data.clone())?);
    for i in 0..cfg.encoder_channels.len() {
        h = h
            .conv1d(params.get(&format!("enc.conv{i}.weight"))?, params.get(&format!("enc.conv{i}.bias"))?)?
            .relu();
        h = time_norm(
            h,
            params.get(&format!("enc.norm{i}.scale"))?,
            params.get(&format!("enc.norm{i}.shift"))?,
        )?;
    }
    let out = h
        .t()?
        .matmul(params.get("enc.out.weight")?)?
        .add(params.get("enc.out.bias")?)?;
    let mu = out.slice_cols(0, 1)?.reshape(&[frames])?;
    let logvar = out.slice_cols(1, 2)?.reshape(&[frames])?;
    Ok((mu, logvar))
}

/// Gated recurrent unit over the rows of `x`, starting from a zero state.
fn gru<'t>(tape: &'t Tape, params: &BoundParams<'t>, x: Var<'t>, hidden: usize) -> Result<Var<'t>> {
    let frames = x.value().rows();
    let xi = x.matmul(params.get("dec.gru.w_ih")?)?.add(params.get("dec.gru.b_ih")?)?;
    let w_hh = params.get("dec.gru.w_hh")?;
    let b_hh = params.get("dec.gru.b_hh")?;
    let mut h = tape.constant(Tensor::zeros(&[1, hidden]));
    let mut states = Vec::with_capacity(frames);
    for t in 0..frames {
        let xt = xi.slice_rows(t, t + 1)?;
        let hh = h.matmul(w_hh)?.add(b_hh)?;
        let gates = xt
            .slice_cols(0, 2 * hidden)?
            .add(hh.slice_cols(0, 2 * hidden)?)?
            .sigmoid();
        let reset = gates.slice_cols(0, hidden)?;
        let update = gates.slice_cols(hidden, 2 * hidden)?;
        let candidate = xt
            .slice_cols(2 * hidden, 3 * hidden)?
            .add(reset.mul(hh.slice_cols(2 * hidden, 3 * hidden)?)?)?
            .tanh();
        h = candidate.add(update.mul(h.sub(candidate)?)?)?;
        states.push(h);
    }
    Var::concat_rows(&states)
}

/// Decoder outputs still on the tape, after their output nonlinearities.
#[derive(Clone, Copy)]
pub struct DecodedVars<'t> {
    /// `[frames]`
    pub harmonic_amp: Var<'t>,
    /// `[frames x harmonics]`, rows sum to one.
    pub distribution: Var<'t>,
    /// `[frames x bands]`
    pub noise_bands: Var<'t>,
    /// `[frames]`, in `(0, 0.5)`.
    pub transient_freq: Var<'t>,
    /// `[frames]`, already gated by the onset vector.
    pub transient_amp: Var<'t>,
}

pub fn decode_var<'t>(
    tape: &'t Tape,
    params: &BoundParams<'t>,
    cfg: &ModelConfig,
    ctrl: &ControlFrames,
    z: Var<'t>,
) -> Result<DecodedVars<'t>> {
    let frames = ctrl.frames();
    if z.value().len() != frames {
        return config_err(format!("z has {} values for {frames} frames", z.value().len()));
    }
    let inputs = [
        column(tape, ctrl.f0.iter().map(|&f| f0_feature(f)).collect()),
        column(tape, ctrl.loudness.iter().map(|&l| loudness_feature(l)).collect()),
        column(tape, ctrl.onset.clone()),
        z.reshape(&[frames, 1])?,
    ];
    let mut projected = Vec::with_capacity(inputs.len());
    for (name, x) in DECODER_INPUTS.iter().zip(inputs) {
        let w = params.get(&format!("dec.proj.{name}.weight"))?;
        let b = params.get(&format!("dec.proj.{name}.bias"))?;
        projected.push(x.matmul(w)?.add(b)?.leaky_relu(LEAK));
    }
    let hidden = gru(tape, params, Var::concat_cols(&projected)?, cfg.hidden_units)?;
    let heads = hidden
        .matmul(params.get("dec.out.weight")?)?
        .add(params.get("dec.out.bias")?)?;
    let (k, b) = (cfg.n_harmonics, cfg.n_noise_bands);
    let onset = tape.constant(Tensor::vector(ctrl.onset.clone()));
    Ok(DecodedVars {
        harmonic_amp: scaled_sigmoid(heads.slice_cols(0, 1)?).reshape(&[frames])?,
        distribution: scaled_sigmoid(heads.slice_cols(1, 1 + k)?).normalize_rows(),
        noise_bands: scaled_sigmoid(heads.slice_cols(1 + k, 1 + k + b)?),
        transient_freq: heads
            .slice_cols(1 + k + b, 2 + k + b)?
            .sigmoid()
            .scale(0.5)
            .reshape(&[frames])?,
        transient_amp: scaled_sigmoid(heads.slice_cols(2 + k + b, 3 + k + b)?)
            .reshape(&[frames])?
            .mul(onset)?,
    })
}

impl DecodedVars<'_> {
    /// Plain values for the non-differentiable synthesizers.
    pub fn to_params(&self) -> SynthParams {
        let dist = self.distribution.value();
        let noise = self.noise_bands.value();
        SynthParams {
            n_harmonics: dist.cols(),
            n_bands: noise.cols(),
            harmonic_amp: self.harmonic_amp.value().data().to_vec(),
            harmonic_distribution: dist.data().to_vec(),
            noise_bands: noise.data().to_vec(),
            // sigmoid saturates to exactly 1 for large inputs
            transient_freq: self
                .transient_freq
                .value()
                .data()
                .iter()
                .map(|&f| f.min(0.5 - 1e-12))
                .collect(),
            transient_amp: self.transient_amp.value().data().to_vec(),
        }
    }
}

/// Differentiable counterpart of [`crate::dsp::render`].
#[derive(Debug, Clone)]
pub struct Renderer {
    frame: FrameConfig,
    n_bands: usize,
    /// `[bands x taps]`
    basis_t: Tensor,
    /// `[1 x frame_size]` holding `0..frame_size`
    coeff_index: Tensor,
}

impl Renderer {
    pub fn new(frame: FrameConfig, n_bands: usize) -> Result<Self> {
        frame.validate()?;
        let taps = frame.noise_taps();
        let basis = noise_filter_basis(taps, n_bands);
        let mut t = vec![0.0; basis.len()];
        for i in 0..taps {
            for b in 0..n_bands {
                t[b * taps + i] = basis[i * n_bands + b];
            }
        }
        Ok(Self {
            frame,
            n_bands,
            basis_t: Tensor::new(vec![n_bands, taps], t)?,
            coeff_index: Tensor::new(
                vec![1, frame.frame_size],
                (0..frame.frame_size).map(|k| k as f64).collect(),
            )?,
        })
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    /// Harmonic plus filtered noise plus transient branch, `[samples]`.
    pub fn render<'t>(
        &self,
        tape: &'t Tape,
        d: &DecodedVars<'t>,
        f0: &[f64],
        harmonic_indicator: &[f64],
        noise_seed: u64,
    ) -> Result<Var<'t>> {
        let cfg = &self.frame;
        let frames = cfg.frame_count;
        cfg.check_frames("f0", f0.len())?;
        cfg.check_frames("harmonic indicator", harmonic_indicator.len())?;
        if f0.iter().any(|&f| f < 0.0 || !f.is_finite()) {
            return input_err("f0 must be finite and non-negative");
        }
        let k = d.distribution.value().cols();
        if d.noise_bands.value().cols() != self.n_bands {
            return config_err("noise band count differs from the renderer");
        }
        let mask = tape.constant(Tensor::new(vec![frames, k], antialias_mask(f0, k, cfg.sample_rate))?);
        let gain = d
            .harmonic_amp
            .reshape(&[frames, 1])?
            .mul(column(tape, harmonic_indicator.to_vec()))?;
        let harmonic = d
            .distribution
            .mul(mask)?
            .normalize_rows()
            .mul(gain)?
            .oscillator_bank(tape.constant(Tensor::vector(f0.to_vec())), cfg)?;

        let source = tape.constant(Tensor::vector(white_noise(cfg.len(), noise_seed)));
        let noise = d
            .noise_bands
            .matmul(tape.constant(self.basis_t.clone()))?
            .frame_convolve(source, cfg)?;

        let transient = d
            .transient_freq
            .reshape(&[frames, 1])?
            .matmul(tape.constant(self.coeff_index.clone()))?
            .scale(TAU)
            .sin()
            .mul(d.transient_amp.reshape(&[frames, 1])?)?
            .idct_rows()?
            .reshape(&[cfg.len()])?;

        harmonic.add(noise)?.add(transient)
    }
}
