use std::f64::consts::PI;

/// Orthonormal DCT-II basis, row `k` holds `s_k * cos(pi * (2n + 1) * k / 2N)`.
///
/// DCT-II is `basis * x`; its inverse DCT-III is `basis^T * c`.
#[derive(Debug, Clone)]
pub struct DctTable {
    n: usize,
    basis: Vec<f64>,
}

impl DctTable {
    pub fn new(n: usize) -> Self {
        let mut basis = vec![0.0; n * n];
        let nf = n as f64;
        for k in 0..n {
            let scale = if k == 0 {
                (1.0 / nf).sqrt()
            } else {
                (2.0 / nf).sqrt()
            };
            for i in 0..n {
                basis[k * n + i] = scale * (PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos();
            }
        }
        Self { n, basis }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Forward orthonormal DCT-II into `out`.
    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (k, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.basis[k * n..(k + 1) * n];
            *o = row.iter().zip(x).map(|(b, v)| b * v).sum();
        }
    }

    /// Orthonormal DCT-III (inverse of `forward`) into `out`.
    pub fn inverse(&self, coeffs: &[f64], out: &mut [f64]) {
        let n = self.n;
        out[..n].iter_mut().for_each(|o| *o = 0.0);
        for (k, &c) in coeffs.iter().enumerate().take(n) {
            if c == 0.0 {
                continue;
            }
            let row = &self.basis[k * n..(k + 1) * n];
            for (o, b) in out.iter_mut().zip(row) {
                *o += c * b;
            }
        }
    }
}

pub fn dct2_ortho(x: &[f64]) -> Vec<f64> {
    let table = DctTable::new(x.len());
    let mut out = vec![0.0; x.len()];
    table.forward(x, &mut out);
    out
}

pub fn dct3_ortho(coeffs: &[f64]) -> Vec<f64> {
    let table = DctTable::new(coeffs.len());
    let mut out = vec![0.0; coeffs.len()];
    table.inverse(coeffs, &mut out);
    out
}
