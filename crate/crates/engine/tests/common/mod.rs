#![allow(dead_code)]

use ddsp_sfx::config::RunConfig;
use ddsp_sfx_core::model::{ModelConfig, TrainConfig};
use hound::{SampleFormat, WavSpec, WavWriter};
use std::f64::consts::TAU;
use std::path::Path;

/// Writes interleaved 16-bit PCM.
pub fn write_pcm16(path: &Path, channels: u16, rate: u32, frames: &[Vec<f64>]) {
    let spec = WavSpec {
        channels,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec).unwrap();
    for frame in frames {
        for &s in frame {
            w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16).unwrap();
        }
    }
    w.finalize().unwrap();
}

pub fn write_float(path: &Path, rate: u32, samples: &[f64]) {
    let spec = WavSpec {
        channels: 1,
        sample_rate: rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample(s as f32).unwrap();
    }
    w.finalize().unwrap();
}

pub fn tone_with_clicks(rate: u32, seconds: f64, freq: f64) -> Vec<f64> {
    let n = (rate as f64 * seconds) as usize;
    let mut x: Vec<f64> = (0..n)
        .map(|i| 0.4 * (TAU * freq * i as f64 / rate as f64).sin())
        .collect();
    for t in [0.5, 1.25, 2.2] {
        let i = (t * rate as f64) as usize;
        if i < n {
            x[i] += 0.5;
        }
    }
    x
}

pub fn mono_wav(path: &Path, rate: u32, seconds: f64, freq: f64) {
    let x = tone_with_clicks(rate, seconds, freq);
    let frames: Vec<Vec<f64>> = x.into_iter().map(|s| vec![s]).collect();
    write_pcm16(path, 1, rate, &frames);
}

/// Small enough that a handful of steps take a few seconds.
pub fn tiny_run(steps: u64) -> RunConfig {
    RunConfig {
        model: ModelConfig {
            hidden_units: 8,
            n_harmonics: 8,
            n_noise_bands: 8,
            encoder_channels: vec![4],
            encoder_kernel: 3,
            projection_units: 4,
        },
        train: TrainConfig {
            batch_size: 1,
            total_steps: steps,
            ..TrainConfig::default()
        },
        checkpoint_every: 0,
    }
}
