//! Objective distances between clips and between embedding sets.

use crate::dsp::AudioClip;
use crate::error::{input_err, Error, Result};
use crate::model::{multiscale_stft_loss, FFT_SIZES};
use crate::spectral::stft_frames;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

const LOG_FLOOR: f64 = 1e-7;

/// Mean over the loss scales of the RMS difference of log10 magnitudes.
pub fn log_spectral_distance(x: &AudioClip, y: &AudioClip) -> Result<f64> {
    log_spectral_distance_raw(x.samples(), y.samples())
}

pub fn log_spectral_distance_raw(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return input_err(format!("signal lengths differ: {} vs {}", x.len(), y.len()));
    }
    if x.is_empty() {
        return input_err("empty signal");
    }
    let mut total = 0.0;
    for n_fft in FFT_SIZES {
        let mx = stft_frames(x, n_fft, n_fft / 4, n_fft)?.magnitudes();
        let my = stft_frames(y, n_fft, n_fft / 4, n_fft)?.magnitudes();
        let sq: f64 = mx
            .iter()
            .zip(&my)
            .map(|(a, b)| {
                let d = (a + LOG_FLOOR).log10() - (b + LOG_FLOOR).log10();
                d * d
            })
            .sum();
        total += (sq / mx.len() as f64).sqrt();
    }
    Ok(total / FFT_SIZES.len() as f64)
}

/// The training reconstruction loss used as a distance.
pub fn multiscale_stft_distance(x: &AudioClip, y: &AudioClip) -> Result<f64> {
    multiscale_stft_loss(x, y)
}

/// `M` embedding vectors of dimension `D`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub label: String,
    count: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingSet {
    pub fn new(label: impl Into<String>, count: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if count < 2 {
            return input_err(format!("need at least 2 embeddings, got {count}"));
        }
        if dim == 0 {
            return input_err("embedding dimension is zero");
        }
        if data.len() != count * dim {
            return input_err(format!("{} values for {count} x {dim} embeddings", data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return input_err("embeddings contain non-finite values");
        }
        Ok(Self {
            label: label.into(),
            count,
            dim,
            data,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut mu = DVector::zeros(self.dim);
        for i in 0..self.count {
            mu += DVector::from_row_slice(self.row(i));
        }
        mu / self.count as f64
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mu = self.mean();
        let mut cov = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.count {
            let d = DVector::from_row_slice(self.row(i)) - &mu;
            cov += &d * d.transpose();
        }
        cov / (self.count - 1) as f64
    }

    /// Little-endian `u32` count, `u32` dimension, then `f32` values.
    pub fn read_from(label: impl Into<String>, mut r: impl Read) -> Result<Self> {
        let mut head = [0u8; 8];
        r.read_exact(&mut head)
            .map_err(|e| Error::Format(format!("embedding header: {e}")))?;
        let count = u32::from_le_bytes(head[..4].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(head[4..].try_into().unwrap()) as usize;
        let n = count
            .checked_mul(dim)
            .filter(|n| *n <= 1 << 28)
            .ok_or_else(|| Error::Format(format!("implausible embedding shape {count} x {dim}")))?;
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw)
            .map_err(|e| Error::Format(format!("truncated embeddings: {e}")))?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        Self::new(label, count, dim, data)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&(self.count as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Labelled by the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = std::fs::File::open(path)?;
        Self::read_from(label, std::io::BufReader::new(file))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Fréchet distance between Gaussians fitted to two embedding sets.
pub fn frechet_distance(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<f64> {
    if a.dim != b.dim {
        return input_err(format!("embedding dimensions differ: {} vs {}", a.dim, b.dim));
    }
    let diff = a.mean() - b.mean();
    let (ca, cb) = (a.covariance(), b.covariance());
    let root_a = psd_sqrt(&ca)?;
    let product = &root_a * &cb * &root_a;
    let product = (&product + product.transpose()) * 0.5;
    let cross: f64 = clamped_eigenvalues(&product)?.iter().map(|l| l.sqrt()).sum();
    let d = diff.norm_squared() + ca.trace() + cb.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}

/// Eigenvalues of a symmetric matrix with round-off negatives set to zero.
fn clamped_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("eigendecomposition did not converge".into()))?;
    clamp(eig.eigenvalues.as_slice(), m)
}

fn clamp(values: &[f64], m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let tol = 1e-8 * m.amax().max(1.0);
    values
        .iter()
        .map(|&l| {
            if l < -tol {
                Err(Error::Numeric(format!("matrix is not positive semidefinite (eigenvalue {l:e})")))
            } else {
                Ok(l.max(0.0))
            }
        })
        .collect()
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("eigendecomposition did not converge".into()))?;
    let roots = DVector::from_vec(clamp(eig.eigenvalues.as_slice(), m)?.iter().map(|l| l.sqrt()).collect());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Distances for one reference/generated pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub name: String,
    pub lsd: f64,
    pub msstft: f64,
}

impl PairMetrics {
    pub fn compute(name: impl Into<String>, reference: &AudioClip, generated: &AudioClip) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            lsd: log_spectral_distance(reference, generated)?,
            msstft: multiscale_stft_distance(reference, generated)?,
        })
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub pairs: Vec<PairMetrics>,
    pub skipped: Vec<String>,
    pub lsd: Summary,
    pub msstft: Summary,
    pub frechet: Option<f64>,
}

impl MetricReport {
    pub fn new(pairs: Vec<PairMetrics>, skipped: Vec<String>, frechet: Option<f64>) -> Self {
        let lsd: Vec<f64> = pairs.iter().map(|p| p.lsd).collect();
        let msstft: Vec<f64> = pairs.iter().map(|p| p.msstft).collect();
        Self {
            lsd: Summary::of(&lsd),
            msstft: Summary::of(&msstft),
            pairs,
            skipped,
            frechet,
        }
    }

    /// One `key=value` per line, aggregates first.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "pairs={}", self.pairs.len());
        let _ = writeln!(s, "skipped={}", self.skipped.len());
        let _ = writeln!(s, "lsd.mean={}", self.lsd.mean);
        let _ = writeln!(s, "lsd.std={}", self.lsd.std);
        let _ = writeln!(s, "msstft.mean={}", self.msstft.mean);
        let _ = writeln!(s, "msstft.std={}", self.msstft.std);
        if let Some(f) = self.frechet {
            let _ = writeln!(s, "frechet={f}");
        }
        for p in &self.pairs {
            let _ = writeln!(s, "pair.{}.lsd={}", p.name, p.lsd);
            let _ = writeln!(s, "pair.{}.msstft={}", p.name, p.msstft);
        }
        for name in &self.skipped {
            let _ = writeln!(s, "skipped.{name}=unpaired");
        }
        s
    }
}
