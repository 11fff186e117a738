//! Central finite-difference oracle for tape gradients, plus the suite of
//! cases shared by the integration tests and the acceptance runner.

#![allow(dead_code)]

use ddsp_sfx_core::autodiff::{Tape, Tensor, Var};
use ddsp_sfx_core::dsp::FrameConfig;
use ddsp_sfx_core::model::{
    decode_var, encode_var, kl_loss_var, multiscale_stft_loss_var, reparameterize_var, scaled_sigmoid,
    DecodedVars, ModelConfig, ParamStore, Renderer,
};
use ddsp_sfx_core::features::{ControlFrames, MelSpec};
use ddsp_sfx_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOLERANCE: f64 = 1e-4;

pub type Graph = Box<dyn for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>>;

pub struct Case {
    pub name: &'static str,
    pub inputs: Vec<Tensor>,
    pub graph: Graph,
}

pub fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Values in `[lo, hi]` with a random sign.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let t = random(rng, shape, lo, hi);
    let signs: Vec<f64> = t
        .data()
        .iter()
        .map(|v| if rng.gen_bool(0.5) { *v } else { -v })
        .collect();
    Tensor::new(shape.to_vec(), signs).unwrap()
}

/// Reduces any output to a scalar with fixed pseudo-random weights so that
/// every output element contributes to the checked gradient.
fn scalarize<'t>(tape: &'t Tape, out: Var<'t>) -> Result<Var<'t>> {
    let v = out.value();
    if v.len() == 1 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let w: Vec<f64> = (0..v.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w = tape.constant(Tensor::new(v.shape().to_vec(), w)?);
    Ok(out.mul(w)?.sum())
}

fn evaluate(graph: &Graph, inputs: &[Tensor]) -> Result<f64> {
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = graph(&tape, &vars)?;
    Ok(scalarize(&tape, out)?.item())
}

/// Largest norm-wise relative error between analytic and central-difference
/// gradients over all inputs.
pub fn relative_error(case: &Case) -> Result<f64> {
    let tape = Tape::new();
    let vars: Vec<Var> = case.inputs.iter().map(|t| tape.var(t.clone())).collect();
    let out = scalarize(&tape, (case.graph)(&tape, &vars)?)?;
    let grads = tape.backward(out)?;
    let mut worst: f64 = 0.0;
    for (i, input) in case.inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[i]);
        let mut numeric = vec![0.0; input.len()];
        for j in 0..input.len() {
            let x = input.data()[j];
            let h = 1e-6 * x.abs().max(1.0);
            let mut plus = case.inputs.clone();
            plus[i].data_mut()[j] = x + h;
            let mut minus = case.inputs.clone();
            minus[i].data_mut()[j] = x - h;
            numeric[j] = (evaluate(&case.graph, &plus)? - evaluate(&case.graph, &minus)?) / (2.0 * h);
        }
        let diff: f64 = analytic
            .data()
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = analytic.norm().max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt());
        let err = if scale < 1e-12 { diff } else { diff / scale };
        if std::env::var("GRADCHECK_VERBOSE").is_ok() {
            eprintln!("{} input {i}: err {err:e} scale {scale:e}", case.name);
        }
        worst = worst.max(err);
    }
    Ok(worst)
}

fn case(name: &'static str, inputs: Vec<Tensor>, graph: Graph) -> Case {
    Case { name, inputs, graph }
}

pub fn miniature_frame() -> FrameConfig {
    FrameConfig::new(16, 2, 16_000).unwrap()
}

/// One case per differentiable primitive.
pub fn primitive_cases() -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let r = &mut rng;
    let frame = miniature_frame();
    vec![
        case("add", vec![random(r, &[3, 4], -1.0, 1.0), random(r, &[4], -1.0, 1.0)],
            Box::new(|_, v| v[0].add(v[1]))),
        case("sub", vec![random(r, &[3, 1], -1.0, 1.0), random(r, &[3, 4], -1.0, 1.0)],
            Box::new(|_, v| v[0].sub(v[1]))),
        case("mul", vec![random(r, &[3, 4], -1.0, 1.0), random(r, &[3, 1], -1.0, 1.0)],
            Box::new(|_, v| v[0].mul(v[1]))),
        case("div", vec![random(r, &[3, 4], -1.0, 1.0), random(r, &[4], 0.5, 2.0)],
            Box::new(|_, v| v[0].div(v[1]))),
        case("scale", vec![random(r, &[5], -1.0, 1.0)], Box::new(|_, v| Ok(v[0].scale(-2.5)))),
        case("offset", vec![random(r, &[5], -1.0, 1.0)], Box::new(|_, v| Ok(v[0].offset(0.7)))),
        case("neg", vec![random(r, &[5], -1.0, 1.0)], Box::new(|_, v| Ok(v[0].neg()))),
        case("sin", vec![random(r, &[6], -3.0, 3.0)], Box::new(|_, v| Ok(v[0].sin()))),
        case("cos", vec![random(r, &[6], -3.0, 3.0)], Box::new(|_, v| Ok(v[0].cos()))),
        case("exp", vec![random(r, &[6], -2.0, 2.0)], Box::new(|_, v| Ok(v[0].exp()))),
        case("ln", vec![random(r, &[6], 0.1, 3.0)], Box::new(|_, v| Ok(v[0].ln()))),
        case("sigmoid", vec![random(r, &[6], -4.0, 4.0)], Box::new(|_, v| Ok(v[0].sigmoid()))),
        case("tanh", vec![random(r, &[6], -2.0, 2.0)], Box::new(|_, v| Ok(v[0].tanh()))),
        case("relu", vec![away_from_zero(r, &[8], 0.1, 2.0)], Box::new(|_, v| Ok(v[0].relu()))),
        case("leaky_relu", vec![away_from_zero(r, &[8], 0.1, 2.0)],
            Box::new(|_, v| Ok(v[0].leaky_relu(0.01)))),
        case("abs", vec![away_from_zero(r, &[8], 0.1, 2.0)], Box::new(|_, v| Ok(v[0].abs()))),
        case("square", vec![random(r, &[6], -2.0, 2.0)], Box::new(|_, v| Ok(v[0].square()))),
        case("sqrt", vec![random(r, &[6], 0.2, 3.0)], Box::new(|_, v| Ok(v[0].sqrt()))),
        case("powf", vec![random(r, &[6], 0.2, 1.0)], Box::new(|_, v| Ok(v[0].powf(std::f64::consts::LN_10)))),
        case("matmul", vec![random(r, &[3, 3], -1.0, 1.0), random(r, &[3, 3], -1.0, 1.0)],
            Box::new(|_, v| v[0].matmul(v[1]))),
        case("matmul_rect", vec![random(r, &[2, 5], -1.0, 1.0), random(r, &[5, 3], -1.0, 1.0)],
            Box::new(|_, v| v[0].matmul(v[1]))),
        case("transpose", vec![random(r, &[2, 5], -1.0, 1.0)], Box::new(|_, v| v[0].t())),
        case("sum", vec![random(r, &[2, 5], -1.0, 1.0)], Box::new(|_, v| Ok(v[0].sum()))),
        case("mean", vec![random(r, &[2, 5], -1.0, 1.0)], Box::new(|_, v| Ok(v[0].mean()))),
        case("sum_last", vec![random(r, &[3, 4], -1.0, 1.0)], Box::new(|_, v| Ok(v[0].sum_last()))),
        case("mean_last", vec![random(r, &[3, 4], -1.0, 1.0)], Box::new(|_, v| Ok(v[0].mean_last()))),
        case("normalize_rows", vec![random(r, &[3, 4], 0.1, 2.0)],
            Box::new(|_, v| Ok(v[0].normalize_rows()))),
        case("cumsum", vec![random(r, &[7], -1.0, 1.0)], Box::new(|_, v| Ok(v[0].cumsum()))),
        case("reshape", vec![random(r, &[2, 6], -1.0, 1.0)], Box::new(|_, v| v[0].reshape(&[3, 4]))),
        case("slice_cols", vec![random(r, &[3, 6], -1.0, 1.0)], Box::new(|_, v| v[0].slice_cols(1, 4))),
        case("slice_rows", vec![random(r, &[5, 3], -1.0, 1.0)], Box::new(|_, v| v[0].slice_rows(1, 3))),
        case("concat_cols", vec![random(r, &[3, 2], -1.0, 1.0), random(r, &[3, 4], -1.0, 1.0)],
            Box::new(|_, v| Var::concat_cols(&[v[0], v[1], v[0]]))),
        case("concat_rows", vec![random(r, &[2, 3], -1.0, 1.0), random(r, &[1, 3], -1.0, 1.0)],
            Box::new(|_, v| Var::concat_rows(&[v[0], v[1]]))),
        case("upsample", vec![random(r, &[2], -1.0, 1.0)], Box::new(move |_, v| v[0].upsample(&frame))),
        case("upsample_channels", vec![random(r, &[2, 3], -1.0, 1.0)],
            Box::new(move |_, v| v[0].upsample(&frame))),
        case("stft_magnitude", vec![random(r, &[40], -1.0, 1.0)],
            Box::new(|_, v| v[0].stft_magnitude(16, 4, 1.0))),
        case("stft_magnitude_long_window", vec![random(r, &[32], -1.0, 1.0)],
            Box::new(|_, v| v[0].stft_magnitude(64, 16, 0.5))),
        case("idct_rows", vec![random(r, &[3, 8], -1.0, 1.0)], Box::new(|_, v| v[0].idct_rows())),
        case("conv1d", vec![random(r, &[3, 9], -1.0, 1.0), random(r, &[2, 3, 5], -1.0, 1.0), random(r, &[2], -1.0, 1.0)],
            Box::new(|_, v| v[0].conv1d(v[1], v[2]))),
        case("frame_convolve", vec![random(r, &[2, 32], -1.0, 1.0), random(r, &[32], -1.0, 1.0)],
            Box::new(move |_, v| v[0].frame_convolve(v[1], &frame))),
        case("oscillator_bank", vec![random(r, &[2, 4], 0.0, 1.0), random(r, &[2], 300.0, 1500.0)],
            Box::new(move |_, v| v[0].oscillator_bank(v[1], &frame))),
    ]
}

/// Render plus multi-scale loss on the miniature instance, differentiated
/// with respect to pre-activation synthesizer controls.
pub fn composite_render_case() -> Case {
    let frame = miniature_frame();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let r = &mut rng;
    let target: Vec<f64> = (0..frame.len()).map(|_| r.gen_range(-0.5..0.5)).collect();
    let f0 = vec![700.0, 2500.0];
    let harmonic = vec![0.9, 0.4];
    let onset = vec![1.0, 0.3];
    let renderer = Renderer::new(frame, 4).unwrap();
    case(
        "render_multiscale_loss",
        vec![
            random(r, &[2, 1], -1.0, 1.0),
            random(r, &[2, 4], -1.0, 1.0),
            random(r, &[2, 4], -1.0, 1.0),
            random(r, &[2, 1], -1.0, 1.0),
            random(r, &[2, 1], -1.0, 1.0),
        ],
        Box::new(move |tape, v| {
            let onset = tape.constant(Tensor::vector(onset.clone()));
            let d = DecodedVars {
                harmonic_amp: scaled_sigmoid(v[0]).reshape(&[2])?,
                distribution: scaled_sigmoid(v[1]).normalize_rows(),
                noise_bands: scaled_sigmoid(v[2]),
                transient_freq: v[3].sigmoid().scale(0.5).reshape(&[2])?,
                transient_amp: scaled_sigmoid(v[4]).reshape(&[2])?.mul(onset)?,
            };
            let audio = renderer.render(tape, &d, &f0, &harmonic, 3)?;
            multiscale_stft_loss_var(audio, &target)
        }),
    )
}

/// Tiny full model: encoder, reparameterization, decoder, render and both
/// loss terms, differentiated with respect to every weight.
pub fn composite_model_case() -> Case {
    // enough frames that the per-channel time normalisation is not degenerate
    let frame = FrameConfig::new(16, 5, 16_000).unwrap();
    let cfg = ModelConfig {
        hidden_units: 3,
        n_harmonics: 4,
        n_noise_bands: 4,
        encoder_channels: vec![2, 3],
        encoder_kernel: 3,
        projection_units: 2,
    };
    let params = ParamStore::init(&cfg, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let names: Vec<String> = params.iter().map(|(n, _)| n.clone()).collect();
    // jitter everything so zero biases never sit exactly on an activation kink
    let inputs: Vec<Tensor> = params
        .iter()
        .map(|(_, t)| {
            let data = t.data().iter().map(|v| v + rng.gen_range(-0.3..0.3)).collect();
            Tensor::new(t.shape().to_vec(), data).unwrap()
        })
        .collect();
    let mel = MelSpec {
        bands: 128,
        frames: 5,
        data: (0..640).map(|_| rng.gen_range(0.0..2.0)).collect(),
    };
    let ctrl = ControlFrames {
        f0: vec![440.0, 0.0, 1200.0, 660.0, 0.0],
        loudness: vec![-20.0, -45.0, -10.0, -30.0, -70.0],
        onset: vec![0.0, 1.0, 0.0, 0.4, 0.0],
        harmonic: vec![0.95, 0.1, 0.8, 0.6, 0.05],
        z: None,
    };
    let target: Vec<f64> = (0..frame.len()).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let eps = vec![0.3, -1.2, 0.7, -0.1, 1.5];
    let renderer = Renderer::new(frame, 4).unwrap();
    case(
        "model_total_loss",
        inputs,
        Box::new(move |tape, v| {
            let bound = bind_vars(&names, v);
            let (mu, logvar) = encode_var(tape, &bound, &cfg, &mel)?;
            let z = reparameterize_var(mu, logvar, &eps)?;
            let d = decode_var(tape, &bound, &cfg, &ctrl, z)?;
            let audio = renderer.render(tape, &d, &ctrl.f0, &ctrl.harmonic, 9)?;
            multiscale_stft_loss_var(audio, &target)?.add(kl_loss_var(mu, logvar)?.scale(0.5))
        }),
    )
}

fn bind_vars<'t>(names: &[String], vars: &[Var<'t>]) -> ddsp_sfx_core::model::BoundParams<'t> {
    ddsp_sfx_core::model::BoundParams::from_vars(names.iter().cloned().zip(vars.iter().copied()).collect())
}

/// Every case with its error, in a stable order.
pub fn run_suite() -> Vec<(&'static str, Result<f64>)> {
    let mut cases = primitive_cases();
    cases.push(composite_render_case());
    cases.push(composite_model_case());
    cases.iter().map(|c| (c.name, relative_error(c))).collect()
}
