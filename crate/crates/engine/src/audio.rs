//! WAV reading and writing, sample-rate conversion and clip ingestion.

use crate::error::{Error, Result};
use ddsp_sfx_core::{AudioClip, FrameConfig};
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use std::f64::consts::PI;
use std::io::{Cursor, Read};
use std::path::Path;

/// Zero crossings of the interpolation kernel on each side.
const SINC_ZEROS: f64 = 32.0;

/// Mono samples at their native rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub channels: u16,
}

/// Decodes PCM integer or 32-bit float WAV and averages the channels.
pub fn decode_wav(reader: impl Read) -> Result<Decoded> {
    let reader = WavReader::new(reader).map_err(|e| Error::Wav(e.to_string()))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Wav("zero channels".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Int, bits @ 8..=32) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
        }
        (format, bits) => return Err(Error::Wav(format!("unsupported {format:?} with {bits} bits"))),
    }
    .map_err(|e| Error::Wav(e.to_string()))?;
    let samples = interleaved
        .chunks_exact(channels)
        .map(|c| c.iter().sum::<f64>() / channels as f64)
        .collect();
    Ok(Decoded {
        samples,
        sample_rate: spec.sample_rate,
        channels: spec.channels,
    })
}

/// Band-limited resampling with a Hann-windowed sinc kernel.
pub fn resample(input: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || input.is_empty() {
        return input.to_vec();
    }
    let step = from as f64 / to as f64;
    // lowpass at the lower of the two Nyquist rates
    let cutoff = (to as f64 / from as f64).min(1.0);
    let half = SINC_ZEROS / cutoff;
    let out_len = ((input.len() as u64 * to as u64) / from as u64) as usize;
    (0..out_len)
        .map(|n| {
            let t = n as f64 * step;
            let lo = (t - half).ceil().max(0.0) as usize;
            let hi = ((t + half).floor() as usize).min(input.len() - 1);
            let mut acc = 0.0;
            for (k, x) in input.iter().enumerate().take(hi + 1).skip(lo) {
                let d = t - k as f64;
                let window = 0.5 + 0.5 * (PI * d / half).cos();
                acc += x * cutoff * sinc(cutoff * d) * window;
            }
            acc
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Mono, resampled to the frame rate, first `len` samples kept, zero-padded
/// at the tail, and scaled down only if the peak exceeds full scale.
pub fn conform(decoded: &Decoded, frame: &FrameConfig) -> Result<AudioClip> {
    let target = frame.len();
    let needed = (target as u64 * decoded.sample_rate as u64).div_ceil(frame.sample_rate as u64) as usize;
    // a kernel's width of context past the kept region keeps the tail exact
    let context = needed + (2.0 * SINC_ZEROS * decoded.sample_rate as f64 / frame.sample_rate as f64) as usize + 2;
    let source = &decoded.samples[..decoded.samples.len().min(context)];
    let mut samples = resample(source, decoded.sample_rate, frame.sample_rate);
    let full_len = ((decoded.samples.len() as u64 * frame.sample_rate as u64) / decoded.sample_rate as u64) as usize;
    samples.truncate(full_len.min(target));
    samples.resize(target, 0.0);
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 1.0 {
        samples.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(AudioClip::new(samples, frame.sample_rate)?)
}

pub fn ingest_bytes(bytes: &[u8], frame: &FrameConfig) -> Result<AudioClip> {
    conform(&decode_wav(Cursor::new(bytes))?, frame)
}

/// Reads a WAV file into a training-ready clip; failures name the file.
pub fn ingest(path: &Path, frame: &FrameConfig) -> Result<AudioClip> {
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let decoded = decode_wav(std::io::BufReader::new(file)).map_err(|e| Error::file(path, e))?;
    conform(&decoded, frame).map_err(|e| Error::file(path, e))
}

/// 16-bit PCM mono; samples outside [-1, 1] are clamped.
pub fn encode_wav(clip: &AudioClip) -> Result<Vec<u8>> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::with_capacity(44 + clip.len() * 2));
    {
        let mut w = WavWriter::new(&mut buf, spec).map_err(|e| Error::Wav(e.to_string()))?;
        for &s in clip.samples() {
            let v = (s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16;
            w.write_sample(v).map_err(|e| Error::Wav(e.to_string()))?;
        }
        w.finalize().map_err(|e| Error::Wav(e.to_string()))?;
    }
    Ok(buf.into_inner())
}

pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    std::fs::write(path, encode_wav(clip)?).map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, sr: u32, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| (2.0 * PI * freq * n as f64 / sr as f64).sin())
            .collect()
    }

    #[test]
    fn resampling_preserves_a_passband_tone() {
        let x = sine(1000.0, 44_100, 44_100);
        let y = resample(&x, 44_100, 16_000);
        assert_eq!(y.len(), 16_000);
        let expect = sine(1000.0, 16_000, 16_000);
        for n in 200..15_800 {
            assert!((y[n] - expect[n]).abs() < 2e-3, "{n}");
        }
    }

    #[test]
    fn resampling_removes_content_above_the_new_nyquist() {
        let x = sine(12_000.0, 44_100, 44_100);
        let y = resample(&x, 44_100, 16_000);
        let rms = (y[200..15_800].iter().map(|v| v * v).sum::<f64>() / 15_600.0).sqrt();
        assert!(rms < 0.01, "{rms}");
    }

    #[test]
    fn identity_rate_is_a_copy() {
        let x = vec![0.1, -0.2, 0.3];
        assert_eq!(resample(&x, 16_000, 16_000), x);
    }

    #[test]
    fn pcm16_round_trip() {
        let clip = AudioClip::new(vec![0.0, 0.5, -0.5, 1.5, -1.0], 16_000).unwrap();
        let bytes = encode_wav(&clip).unwrap();
        let back = decode_wav(Cursor::new(&bytes)).unwrap();
        assert_eq!(back.sample_rate, 16_000);
        assert_eq!(back.channels, 1);
        let expect = [0.0, 16384.0 / 32768.0, -16384.0 / 32768.0, 32767.0 / 32768.0, -32767.0 / 32768.0];
        for (a, b) in back.samples.iter().zip(expect) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn conform_pads_trims_and_normalizes() {
        let frame = FrameConfig::default();
        let short = Decoded {
            samples: vec![2.0; 100],
            sample_rate: 16_000,
            channels: 1,
        };
        let clip = conform(&short, &frame).unwrap();
        assert_eq!(clip.len(), 64_000);
        assert_eq!(clip.peak(), 1.0);
        assert!(clip.samples()[100..].iter().all(|&v| v == 0.0));
        let long = Decoded {
            samples: (0..80_000).map(|n| (n as f64 * 1e-5).sin() * 0.5).collect(),
            sample_rate: 16_000,
            channels: 1,
        };
        let clip = conform(&long, &frame).unwrap();
        assert_eq!(clip.samples(), &long.samples[..64_000]);
    }

    #[test]
    fn garbage_is_a_wav_error() {
        assert!(matches!(decode_wav(Cursor::new(b"not a wav file")), Err(Error::Wav(_))));
    }
}
