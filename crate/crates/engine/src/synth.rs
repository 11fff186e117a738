use crate::error::{Error, Result};
use ddsp_sfx_core::features::{analyze, ControlFrames};
use ddsp_sfx_core::model::Model;
use ddsp_sfx_core::AudioClip;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Range of the user-facing timbre control.
pub const Z_LIMIT: f64 = 3.0;

/// Peak level applied when a render would clip: -1 dBFS.
pub const CLIP_TARGET_PEAK: f64 = 0.891_250_938_133_745_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZMode {
    /// Latent from the encoder, posterior mean unless sampling is requested.
    Encoded,
    Constant(f64),
    /// One value per frame.
    Curve(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// A guiding sound, analyzed before decoding.
    Audio(AudioClip),
    /// Controls computed elsewhere; encoded mode needs their `z`.
    Features(ControlFrames),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisRequest {
    pub source: Source,
    pub z: ZMode,
    pub seed: u64,
    /// Draw the encoded latent with seeded noise instead of using the mean.
    pub sample_latent: bool,
}

fn clamp_z(v: f64) -> f64 {
    v.clamp(-Z_LIMIT, Z_LIMIT)
}

/// Controls with `z` filled in according to the request.
pub fn resolve_controls(model: &Model, req: &SynthesisRequest) -> Result<ControlFrames> {
    let frames = model.frame().frame_count;
    let (mut ctrl, mel) = match &req.source {
        Source::Audio(clip) => {
            let a = analyze(clip, model.frame())?;
            (a.controls, Some(a.mel))
        }
        Source::Features(c) => (c.clone(), None),
    };
    ctrl.z = Some(match &req.z {
        ZMode::Constant(c) => {
            if !c.is_finite() {
                return Err(Error::Request("z value must be finite".into()));
            }
            vec![clamp_z(*c); frames]
        }
        ZMode::Curve(curve) => {
            if curve.len() != frames {
                return Err(Error::Request(format!("z curve has {} values, expected {frames}", curve.len())));
            }
            if curve.iter().any(|v| !v.is_finite()) {
                return Err(Error::Request("z curve must be finite".into()));
            }
            curve.iter().map(|&v| clamp_z(v)).collect()
        }
        ZMode::Encoded => match (mel, ctrl.z.take()) {
            (Some(mel), _) => {
                let eps: Vec<f64> = if req.sample_latent {
                    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
                    (0..frames).map(|_| rng.sample(StandardNormal)).collect()
                } else {
                    vec![0.0; frames]
                };
                model.encode(&mel, &eps)?.z
            }
            (None, Some(z)) => z,
            (None, None) => {
                return Err(Error::Request("encoded mode needs audio or features carrying z".into()))
            }
        },
    });
    Ok(ctrl)
}

/// Decode and render; scaled to -1 dBFS only if the result would clip.
pub fn synthesize(model: &Model, req: &SynthesisRequest) -> Result<AudioClip> {
    let ctrl = resolve_controls(model, req)?;
    let clip = model.render(&ctrl, req.seed)?;
    let peak = clip.peak();
    if peak <= 1.0 {
        return Ok(clip);
    }
    let gain = CLIP_TARGET_PEAK / peak;
    let rate = clip.sample_rate();
    Ok(AudioClip::new(clip.into_samples().into_iter().map(|v| v * gain).collect(), rate)?)
}
