//! Signal-processing primitives on the tape.

use super::ops::Op;
use super::{Tensor, Var};
use crate::dsp::{self, interpolation_weights, DctTable, FrameConfig, Interp};
use crate::error::{config_err, Result};
use crate::spectral::{reflect_index, stft_frames};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;
use std::rc::Rc;

pub(crate) struct StftCache {
    len: usize,
    hop: usize,
    n_fft: usize,
    bins: usize,
    scale: f64,
    window: Vec<f64>,
    spectrum: Vec<Complex64>,
}

pub(crate) fn upsample_backward(input: &Tensor, weights: &[Interp], grad: &Tensor) -> Tensor {
    let cols = if input.rank() == 2 { input.cols() } else { 1 };
    let mut out = vec![0.0; input.len()];
    for (ip, g) in weights.iter().zip(grad.data().chunks(cols)) {
        for c in 0..cols {
            out[ip.lo * cols + c] += (1.0 - ip.w) * g[c];
            out[ip.hi * cols + c] += ip.w * g[c];
        }
    }
    Tensor::from_parts(input.shape().to_vec(), out)
}

pub(crate) fn stft_backward(cache: &StftCache, grad: &Tensor) -> Tensor {
    let n = cache.n_fft;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut out = vec![0.0; cache.len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let half = (n / 2) as isize;
    for (f, (spec, g)) in cache
        .spectrum
        .chunks(cache.bins)
        .zip(grad.data().chunks(cache.bins))
        .enumerate()
    {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        let mut any = false;
        for (k, (x, &gk)) in spec.iter().zip(g).enumerate() {
            let mag = x.norm();
            if mag > 0.0 && gk != 0.0 {
                buf[k] = x * (gk * cache.scale / mag);
                any = true;
            }
        }
        if !any {
            continue;
        }
        ifft.process(&mut buf);
        let start = (f * cache.hop) as isize - half;
        for (t, (b, w)) in buf.iter().zip(&cache.window).enumerate() {
            if *w != 0.0 {
                out[reflect_index(start + t as isize, cache.len)] += w * b.re;
            }
        }
    }
    Tensor::from_parts(vec![cache.len], out)
}

pub(crate) fn idct_rows_backward(table: &DctTable, grad: &Tensor) -> Tensor {
    let n = table.len();
    let mut out = vec![0.0; grad.len()];
    for (o, g) in out.chunks_mut(n).zip(grad.data().chunks(n)) {
        table.forward(g, o);
    }
    Tensor::from_parts(grad.shape().to_vec(), out)
}

fn conv_dims(x: &Tensor, w: &Tensor) -> (usize, usize, usize, usize) {
    let (cin, t) = (x.shape()[0], x.shape()[1]);
    let (cout, k) = (w.shape()[0], w.shape()[2]);
    (cin, t, cout, k)
}

pub(crate) fn conv1d_backward(
    inputs: &[&Tensor],
    grad: &Tensor,
    needs: &[bool],
) -> Vec<Option<Tensor>> {
    let (x, w) = (inputs[0], inputs[1]);
    let (cin, t, cout, k) = conv_dims(x, w);
    let pad = k / 2;
    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; w.len()];
    let g = grad.data();
    for o in 0..cout {
        let go = &g[o * t..(o + 1) * t];
        for c in 0..cin {
            let xc = &x.data()[c * t..(c + 1) * t];
            for j in 0..k {
                // output index i reads input i + j - pad
                let lo = pad.saturating_sub(j);
                let hi = (t + pad).saturating_sub(j).min(t);
                if lo >= hi {
                    continue;
                }
                let widx = (o * cin + c) * k + j;
                if needs[1] {
                    let mut acc = 0.0;
                    for i in lo..hi {
                        acc += go[i] * xc[i + j - pad];
                    }
                    gw[widx] += acc;
                }
                if needs[0] {
                    let wv = w.data()[widx];
                    let gxc = &mut gx[c * t..(c + 1) * t];
                    for i in lo..hi {
                        gxc[i + j - pad] += wv * go[i];
                    }
                }
            }
        }
    }
    let gb = needs[2].then(|| {
        let data = g.chunks(t).map(|row| row.iter().sum()).collect();
        Tensor::from_parts(inputs[2].shape().to_vec(), data)
    });
    vec![
        needs[0].then(|| Tensor::from_parts(x.shape().to_vec(), gx)),
        needs[1].then(|| Tensor::from_parts(w.shape().to_vec(), gw)),
        gb,
    ]
}

pub(crate) fn frame_convolve_backward(
    inputs: &[&Tensor],
    grad: &Tensor,
    needs: &[bool],
    frame_size: usize,
) -> Vec<Option<Tensor>> {
    let (irs, source) = (inputs[0], inputs[1]);
    let taps = irs.cols();
    let delay = taps / 2;
    let len = source.len() as isize;
    let g = grad.data();
    let mut girs = vec![0.0; irs.len()];
    let mut gsrc = vec![0.0; source.len()];
    for (n, ir) in irs.data().chunks(taps).enumerate() {
        let start = (n * frame_size) as isize - delay as isize;
        let gir = &mut girs[n * taps..(n + 1) * taps];
        for j in 0..frame_size {
            let xi = n * frame_size + j;
            let x = source.data()[xi];
            let base = start + j as isize;
            let lo = (-base).max(0) as usize;
            let hi = ((len - base).max(0) as usize).min(taps);
            if lo >= hi {
                continue;
            }
            let gseg = &g[(base + lo as isize) as usize..(base + hi as isize) as usize];
            if needs[0] {
                for (gi, gv) in gir[lo..hi].iter_mut().zip(gseg) {
                    *gi += gv * x;
                }
            }
            if needs[1] {
                gsrc[xi] += ir[lo..hi].iter().zip(gseg).map(|(h, gv)| h * gv).sum::<f64>();
            }
        }
    }
    vec![
        needs[0].then(|| Tensor::from_parts(irs.shape().to_vec(), girs)),
        needs[1].then(|| Tensor::from_parts(source.shape().to_vec(), gsrc)),
    ]
}

pub(crate) fn oscillator_backward(
    inputs: &[&Tensor],
    grad: &Tensor,
    needs: &[bool],
    cfg: &FrameConfig,
) -> Vec<Option<Tensor>> {
    let (amps, f0) = (inputs[0], inputs[1]);
    let k = amps.cols();
    let a = amps.data();
    let weights = interpolation_weights(cfg);
    let sr = cfg.sample_rate as f64;
    let f0_up: Vec<f64> = weights
        .iter()
        .map(|ip| (1.0 - ip.w) * f0.data()[ip.lo] + ip.w * f0.data()[ip.hi])
        .collect();
    let mut ga = vec![0.0; amps.len()];
    let mut dphi = vec![0.0; cfg.len()];
    let mut phase = 0.0;
    let mut sines = vec![0.0; k];
    for (t, ip) in weights.iter().enumerate() {
        phase += TAU * f0_up[t] / sr;
        let g = grad.data()[t];
        if g == 0.0 {
            continue;
        }
        let (s1, c1) = phase.sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut acc = 0.0;
        for (kk, sk) in sines.iter_mut().enumerate() {
            *sk = s;
            if needs[1] {
                let amp = (1.0 - ip.w) * a[ip.lo * k + kk] + ip.w * a[ip.hi * k + kk];
                acc += amp * (kk + 1) as f64 * c;
            }
            let next_s = s * c1 + c * s1;
            c = c * c1 - s * s1;
            s = next_s;
        }
        if needs[0] {
            let (wl, wh) = (g * (1.0 - ip.w), g * ip.w);
            for (dst, sk) in ga[ip.lo * k..(ip.lo + 1) * k].iter_mut().zip(&sines) {
                *dst += wl * sk;
            }
            if wh != 0.0 {
                for (dst, sk) in ga[ip.hi * k..(ip.hi + 1) * k].iter_mut().zip(&sines) {
                    *dst += wh * sk;
                }
            }
        }
        dphi[t] = g * acc;
    }
    let gf0 = needs[1].then(|| {
        let mut out = vec![0.0; f0.len()];
        let mut tail = 0.0;
        for (t, ip) in weights.iter().enumerate().rev() {
            tail += dphi[t];
            let d = TAU / sr * tail;
            out[ip.lo] += (1.0 - ip.w) * d;
            out[ip.hi] += ip.w * d;
        }
        Tensor::from_parts(f0.shape().to_vec(), out)
    });
    vec![needs[0].then(|| Tensor::from_parts(amps.shape().to_vec(), ga)), gf0]
}

impl<'t> Var<'t> {
    /// Frame-rate to sample-rate linear interpolation. Accepts `[frames]`
    /// or `[frames x channels]`.
    pub fn upsample(self, cfg: &FrameConfig) -> Result<Var<'t>> {
        let v = self.value();
        let (frames, cols) = match v.shape() {
            [f] => (*f, 1),
            [f, c] => (*f, *c),
            s => return config_err(format!("upsample of shape {s:?}")),
        };
        cfg.check_frames("upsample", frames)?;
        let weights = Rc::new(interpolation_weights(cfg));
        let mut data = Vec::with_capacity(cfg.len() * cols);
        for ip in weights.iter() {
            for c in 0..cols {
                data.push((1.0 - ip.w) * v.data()[ip.lo * cols + c] + ip.w * v.data()[ip.hi * cols + c]);
            }
        }
        let shape = if v.rank() == 1 {
            vec![cfg.len()]
        } else {
            vec![cfg.len(), cols]
        };
        Ok(self
            .tape
            .push(Tensor::from_parts(shape, data), Op::Upsample(weights), &[self]))
    }

    /// `scale * |STFT(x)|` as `[frames x bins]`: Hann window of `n_fft`,
    /// centered reflect-padded frames.
    pub fn stft_magnitude(self, n_fft: usize, hop: usize, scale: f64) -> Result<Var<'t>> {
        let v = self.value();
        if v.rank() != 1 {
            return config_err("stft_magnitude needs a 1-D signal");
        }
        let spec = stft_frames(v.data(), n_fft, hop, n_fft)?;
        let data = spec.data.iter().map(|c| scale * c.norm()).collect();
        let value = Tensor::from_parts(vec![spec.frames, spec.bins], data);
        let cache = StftCache {
            len: v.len(),
            hop,
            n_fft,
            bins: spec.bins,
            scale,
            window: spec.window,
            spectrum: spec.data,
        };
        Ok(self.tape.push(value, Op::StftMag(Box::new(cache)), &[self]))
    }

    /// Orthonormal DCT-III of every row.
    pub fn idct_rows(self) -> Result<Var<'t>> {
        let v = self.value();
        let n = v.cols();
        if v.rank() == 0 || v.rank() > 2 {
            return config_err("idct_rows needs a vector or matrix");
        }
        let table = Rc::new(DctTable::new(n));
        let mut out = vec![0.0; v.len()];
        for (o, row) in out.chunks_mut(n).zip(v.data().chunks(n)) {
            table.inverse(row, o);
        }
        let value = Tensor::from_parts(v.shape().to_vec(), out);
        Ok(self.tape.push(value, Op::IdctRows(table), &[self]))
    }

    /// 1-D convolution with zero "same" padding: input `[cin x T]`,
    /// weight `[cout x cin x k]` with odd `k`, bias `[cout]`.
    pub fn conv1d(self, weight: Var<'t>, bias: Var<'t>) -> Result<Var<'t>> {
        let (x, w, b) = (self.value(), weight.value(), bias.value());
        if x.rank() != 2 || w.rank() != 3 || w.shape()[1] != x.shape()[0] || w.shape()[2] % 2 == 0 {
            return config_err(format!("conv1d {:?} with kernel {:?}", x.shape(), w.shape()));
        }
        let (cin, t, cout, k) = conv_dims(&x, &w);
        if b.shape() != [cout] {
            return config_err("conv1d bias shape");
        }
        let pad = k / 2;
        let mut out = vec![0.0; cout * t];
        for o in 0..cout {
            let row = &mut out[o * t..(o + 1) * t];
            row.iter_mut().for_each(|v| *v = b.data()[o]);
            for c in 0..cin {
                let xc = &x.data()[c * t..(c + 1) * t];
                for j in 0..k {
                    let wv = w.data()[(o * cin + c) * k + j];
                    if wv == 0.0 {
                        continue;
                    }
                    let lo = pad.saturating_sub(j);
                    let hi = (t + pad).saturating_sub(j).min(t);
                    for i in lo..hi {
                        row[i] += wv * xc[i + j - pad];
                    }
                }
            }
        }
        let value = Tensor::from_parts(vec![cout, t], out);
        Ok(self.tape.push(value, Op::Conv1d, &[self, weight, bias]))
    }

    /// Overlap-add filtering of `source` by the per-frame impulse responses in `self`.
    pub fn frame_convolve(self, source: Var<'t>, cfg: &FrameConfig) -> Result<Var<'t>> {
        let (irs, src) = (self.value(), source.value());
        if irs.rank() != 2 || src.rank() != 1 {
            return config_err("frame_convolve needs [frames x taps] and a 1-D source");
        }
        let out = dsp::frame_convolve(irs.data(), src.data(), cfg)?;
        let value = Tensor::from_parts(vec![cfg.len()], out);
        Ok(self.tape.push(
            value,
            Op::FrameConvolve {
                frame_size: cfg.frame_size,
            },
            &[self, source],
        ))
    }

    /// Additive bank with cumulative phase. `self` holds per-frame partial
    /// amplitudes `[frames x harmonics]`, `f0` is `[frames]` in Hz.
    pub fn oscillator_bank(self, f0: Var<'t>, cfg: &FrameConfig) -> Result<Var<'t>> {
        let (amps, freq) = (self.value(), f0.value());
        if amps.rank() != 2 || freq.rank() != 1 {
            return config_err("oscillator_bank needs [frames x harmonics] and [frames]");
        }
        let out = dsp::oscillator_bank(amps.data(), freq.data(), cfg)?;
        let value = Tensor::from_parts(vec![cfg.len()], out);
        Ok(self.tape.push(value, Op::OscillatorBank(*cfg), &[self, f0]))
    }
}
