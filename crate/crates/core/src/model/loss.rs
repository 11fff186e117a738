use crate::autodiff::{Tensor, Var};
use crate::dsp::AudioClip;
use crate::error::{config_err, input_err, Result};
use crate::spectral::stft_frames;

/// FFT sizes of the multi-scale spectral loss; the hop is a quarter of each.
pub const FFT_SIZES: [usize; 6] = [2048, 1024, 512, 256, 128, 64];

const LOG_FLOOR: f64 = 1e-7;

pub(crate) fn magnitudes(signal: &[f64], n_fft: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let spec = stft_frames(signal, n_fft, n_fft / 4, n_fft)?;
    Ok((vec![spec.frames, spec.bins], spec.magnitudes()))
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return input_err(format!("signal lengths differ: {a} vs {b}"));
    }
    if a == 0 {
        return input_err("empty signal");
    }
    Ok(())
}

/// Sum over scales of the mean linear and mean log magnitude differences.
pub fn multiscale_stft_loss(x: &AudioClip, y: &AudioClip) -> Result<f64> {
    multiscale_stft_loss_raw(x.samples(), y.samples())
}

pub(crate) fn multiscale_stft_loss_raw(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x.len(), y.len())?;
    let mut total = 0.0;
    for n_fft in FFT_SIZES {
        let (_, mx) = magnitudes(x, n_fft)?;
        let (_, my) = magnitudes(y, n_fft)?;
        let count = mx.len() as f64;
        let mut lin = 0.0;
        let mut log = 0.0;
        for (a, b) in mx.iter().zip(&my) {
            lin += (a - b).abs();
            log += ((a + LOG_FLOOR).ln() - (b + LOG_FLOOR).ln()).abs();
        }
        total += lin / count + log / count;
    }
    Ok(total)
}

/// Taped loss of `x` against a fixed target signal.
pub fn multiscale_stft_loss_var<'t>(x: Var<'t>, target: &[f64]) -> Result<Var<'t>> {
    let v = x.value();
    if v.rank() != 1 {
        return config_err("multiscale loss needs a 1-D signal");
    }
    check_lengths(v.len(), target.len())?;
    let tape = x.tape();
    let mut total: Option<Var<'t>> = None;
    for n_fft in FFT_SIZES {
        let (shape, my) = magnitudes(target, n_fft)?;
        let log_y = tape.constant(Tensor::new(shape.clone(), my.iter().map(|m| (m + LOG_FLOOR).ln()).collect())?);
        let y = tape.constant(Tensor::new(shape, my)?);
        let mx = x.stft_magnitude(n_fft, n_fft / 4, 1.0)?;
        let lin = mx.sub(y)?.abs().mean();
        let log = mx.offset(LOG_FLOOR).ln().sub(log_y)?.abs().mean();
        let term = lin.add(log)?;
        total = Some(match total {
            Some(t) => t.add(term)?,
            None => term,
        });
    }
    Ok(total.expect("at least one scale"))
}

/// Mean over frames of `-0.5 (1 + logvar - mu^2 - exp(logvar))`.
pub fn kl_loss(mu: &[f64], logvar: &[f64]) -> Result<f64> {
    check_lengths(mu.len(), logvar.len())?;
    let s: f64 = mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| -0.5 * (1.0 + lv - m * m - lv.exp()))
        .sum();
    Ok(s / mu.len() as f64)
}

pub fn kl_loss_var<'t>(mu: Var<'t>, logvar: Var<'t>) -> Result<Var<'t>> {
    let inner = logvar.offset(1.0).sub(mu.square())?.sub(logvar.exp())?;
    Ok(inner.mean().scale(-0.5))
}

/// `mu + eps * exp(logvar / 2)`.
pub fn reparameterize(mu: &[f64], logvar: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    check_lengths(mu.len(), logvar.len())?;
    check_lengths(mu.len(), eps.len())?;
    Ok(mu
        .iter()
        .zip(logvar)
        .zip(eps)
        .map(|((m, lv), e)| m + e * (0.5 * lv).exp())
        .collect())
}

pub fn reparameterize_var<'t>(mu: Var<'t>, logvar: Var<'t>, eps: &[f64]) -> Result<Var<'t>> {
    let e = mu.tape().constant(Tensor::new(mu.shape(), eps.to_vec())?);
    mu.add(logvar.scale(0.5).exp().mul(e)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use std::f64::consts::TAU;

    fn sine(hz: f64, shift: usize, len: usize) -> AudioClip {
        let x = (0..len)
            .map(|t| (TAU * hz * (t + shift) as f64 / 16_000.0).sin())
            .collect();
        AudioClip::new(x, 16_000).unwrap()
    }

    #[test]
    fn identical_is_zero_and_symmetric() {
        let a = sine(440.0, 0, 8000);
        let b = sine(660.0, 0, 8000);
        assert_eq!(multiscale_stft_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(
            multiscale_stft_loss(&a, &b).unwrap(),
            multiscale_stft_loss(&b, &a).unwrap()
        );
    }

    #[test]
    fn octave_costs_more_than_a_one_sample_shift() {
        let a = sine(440.0, 0, 8000);
        let octave = multiscale_stft_loss(&a, &sine(880.0, 0, 8000)).unwrap();
        let shifted = multiscale_stft_loss(&a, &sine(440.0, 1, 8000)).unwrap();
        assert!(octave > shifted, "{octave} vs {shifted}");
    }

    #[test]
    fn taped_loss_matches_plain() {
        let a = sine(440.0, 0, 4000);
        let b = sine(300.0, 3, 4000);
        let tape = Tape::new();
        let x = tape.var(Tensor::vector(a.samples().to_vec()));
        let taped = multiscale_stft_loss_var(x, b.samples()).unwrap().item();
        let plain = multiscale_stft_loss(&a, &b).unwrap();
        assert!((taped - plain).abs() <= 1e-12 * plain);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(multiscale_stft_loss(&sine(1.0, 0, 100), &sine(1.0, 0, 101)).is_err());
    }

    #[test]
    fn kl_anchors() {
        assert_eq!(kl_loss(&[0.0; 4], &[0.0; 4]).unwrap(), 0.0);
        assert!((kl_loss(&[1.0; 4], &[0.0; 4]).unwrap() - 0.5).abs() < 1e-15);
        let tape = Tape::new();
        let mu = tape.var(Tensor::vector(vec![0.3, -1.0]));
        let lv = tape.var(Tensor::vector(vec![0.2, -0.5]));
        let taped = kl_loss_var(mu, lv).unwrap().item();
        assert!((taped - kl_loss(&[0.3, -1.0], &[0.2, -0.5]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn reparameterize_anchors() {
        assert_eq!(reparameterize(&[0.5, -2.0], &[1.3, 0.2], &[0.0, 0.0]).unwrap(), vec![0.5, -2.0]);
        assert_eq!(reparameterize(&[0.5], &[0.0], &[1.0]).unwrap(), vec![1.5]);
    }
}
