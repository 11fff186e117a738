//! Primitive operations and their backward rules.

use super::signal::{self, StftCache};
use super::{Tensor, Var};
use crate::dsp::{DctTable, FrameConfig, Interp};
use crate::error::{config_err, Error, Result};
use std::rc::Rc;

pub(crate) enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Scale(f64),
    Offset,
    Neg,
    Sin,
    Cos,
    Exp,
    Ln,
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu(f64),
    Abs,
    Square,
    Sqrt,
    Powf(f64),
    Matmul,
    Transpose,
    Sum,
    Mean,
    SumLast,
    MeanLast,
    NormalizeRows,
    Cumsum,
    Reshape,
    SliceCols { start: usize, end: usize },
    SliceRows { start: usize },
    ConcatCols,
    ConcatRows,
    Detach,
    Opaque(&'static str),
    Upsample(Rc<Vec<Interp>>),
    StftMag(Box<StftCache>),
    IdctRows(Rc<DctTable>),
    Conv1d,
    FrameConvolve { frame_size: usize },
    OscillatorBank(FrameConfig),
}

impl Op {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Scale(_) => "scale",
            Op::Offset => "offset",
            Op::Neg => "neg",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Exp => "exp",
            Op::Ln => "ln",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::Relu => "relu",
            Op::LeakyRelu(_) => "leaky_relu",
            Op::Abs => "abs",
            Op::Square => "square",
            Op::Sqrt => "sqrt",
            Op::Powf(_) => "powf",
            Op::Matmul => "matmul",
            Op::Transpose => "transpose",
            Op::Sum => "sum",
            Op::Mean => "mean",
            Op::SumLast => "sum_last",
            Op::MeanLast => "mean_last",
            Op::NormalizeRows => "normalize_rows",
            Op::Cumsum => "cumsum",
            Op::Reshape => "reshape",
            Op::SliceCols { .. } => "slice_cols",
            Op::SliceRows { .. } => "slice_rows",
            Op::ConcatCols => "concat_cols",
            Op::ConcatRows => "concat_rows",
            Op::Detach => "detach",
            Op::Opaque(name) => name,
            Op::Upsample(_) => "upsample",
            Op::StftMag(_) => "stft_magnitude",
            Op::IdctRows(_) => "idct_rows",
            Op::Conv1d => "conv1d",
            Op::FrameConvolve { .. } => "frame_convolve",
            Op::OscillatorBank(_) => "oscillator_bank",
        }
    }

    /// Gradients with respect to each input, given the upstream gradient.
    pub(crate) fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        grad: &Tensor,
        needs: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        let unary = |f: &dyn Fn(f64, f64) -> f64| -> Vec<Option<Tensor>> {
            let x = inputs[0];
            let data = x
                .data()
                .iter()
                .zip(output.data())
                .zip(grad.data())
                .map(|((&x, &y), &g)| g * f(x, y))
                .collect();
            vec![Some(Tensor::from_parts(x.shape().to_vec(), data))]
        };
        Ok(match self {
            Op::Leaf => Vec::new(),
            Op::Add => binary_backward(inputs, grad, needs, |_, _| (1.0, 1.0)),
            Op::Sub => binary_backward(inputs, grad, needs, |_, _| (1.0, -1.0)),
            Op::Mul => binary_backward(inputs, grad, needs, |a, b| (b, a)),
            Op::Div => binary_backward(inputs, grad, needs, |a, b| (1.0 / b, -a / (b * b))),
            Op::Scale(s) => unary(&|_, _| *s),
            Op::Offset => vec![Some(grad.clone())],
            Op::Neg => unary(&|_, _| -1.0),
            Op::Sin => unary(&|x, _| x.cos()),
            Op::Cos => unary(&|x, _| -x.sin()),
            Op::Exp => unary(&|_, y| y),
            Op::Ln => unary(&|x, _| 1.0 / x),
            Op::Sigmoid => unary(&|_, y| y * (1.0 - y)),
            Op::Tanh => unary(&|_, y| 1.0 - y * y),
            Op::Relu => unary(&|x, _| if x > 0.0 { 1.0 } else { 0.0 }),
            Op::LeakyRelu(slope) => unary(&|x, _| if x > 0.0 { 1.0 } else { *slope }),
            Op::Abs => unary(&|x, _| {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }),
            Op::Square => unary(&|x, _| 2.0 * x),
            Op::Sqrt => unary(&|_, y| 0.5 / y),
            Op::Powf(p) => unary(&|x, _| p * x.powf(p - 1.0)),
            Op::Matmul => {
                let (a, b) = (inputs[0], inputs[1]);
                let ga = needs[0].then(|| matmul_raw(grad, false, b, true));
                let gb = needs[1].then(|| matmul_raw(a, true, grad, false));
                vec![ga, gb]
            }
            Op::Transpose => vec![Some(transpose_raw(grad))],
            Op::Sum => vec![Some(Tensor::full(inputs[0].shape(), grad.item()))],
            Op::Mean => {
                let n = inputs[0].len() as f64;
                vec![Some(Tensor::full(inputs[0].shape(), grad.item() / n))]
            }
            Op::SumLast | Op::MeanLast => {
                let x = inputs[0];
                let cols = x.cols();
                let scale = if matches!(self, Op::MeanLast) {
                    1.0 / cols as f64
                } else {
                    1.0
                };
                let data = grad
                    .data()
                    .iter()
                    .flat_map(|&g| std::iter::repeat_n(g * scale, cols))
                    .collect();
                vec![Some(Tensor::from_parts(x.shape().to_vec(), data))]
            }
            Op::NormalizeRows => {
                let x = inputs[0];
                let cols = x.cols();
                let mut data = vec![0.0; x.len()];
                for ((gx, (xr, yr)), gr) in data
                    .chunks_mut(cols)
                    .zip(x.data().chunks(cols).zip(output.data().chunks(cols)))
                    .zip(grad.data().chunks(cols))
                {
                    let total: f64 = xr.iter().sum();
                    if total == 0.0 {
                        continue;
                    }
                    let dot: f64 = gr.iter().zip(yr).map(|(g, y)| g * y).sum();
                    for (o, g) in gx.iter_mut().zip(gr) {
                        *o = (g - dot) / total;
                    }
                }
                vec![Some(Tensor::from_parts(x.shape().to_vec(), data))]
            }
            Op::Cumsum => {
                let mut acc = 0.0;
                let mut data = vec![0.0; grad.len()];
                for (o, g) in data.iter_mut().zip(grad.data()).rev() {
                    acc += g;
                    *o = acc;
                }
                vec![Some(Tensor::from_parts(inputs[0].shape().to_vec(), data))]
            }
            Op::Reshape | Op::Detach => vec![if matches!(self, Op::Reshape) {
                Some(Tensor::from_parts(inputs[0].shape().to_vec(), grad.data().to_vec()))
            } else {
                None
            }],
            Op::SliceCols { start, end } => {
                let x = inputs[0];
                let cols = x.cols();
                let width = end - start;
                let mut data = vec![0.0; x.len()];
                for (row, g) in data.chunks_mut(cols).zip(grad.data().chunks(width)) {
                    row[*start..*end].copy_from_slice(g);
                }
                vec![Some(Tensor::from_parts(x.shape().to_vec(), data))]
            }
            Op::SliceRows { start, .. } => {
                let x = inputs[0];
                let cols = x.cols();
                let mut data = vec![0.0; x.len()];
                data[start * cols..start * cols + grad.len()].copy_from_slice(grad.data());
                vec![Some(Tensor::from_parts(x.shape().to_vec(), data))]
            }
            Op::ConcatCols => {
                let total = grad.cols();
                let mut offset = 0;
                let mut out = Vec::with_capacity(inputs.len());
                for (x, &need) in inputs.iter().zip(needs) {
                    let w = x.cols();
                    if need {
                        let data = grad
                            .data()
                            .chunks(total)
                            .flat_map(|row| row[offset..offset + w].iter().copied())
                            .collect();
                        out.push(Some(Tensor::from_parts(x.shape().to_vec(), data)));
                    } else {
                        out.push(None);
                    }
                    offset += w;
                }
                out
            }
            Op::ConcatRows => {
                let mut offset = 0;
                let mut out = Vec::with_capacity(inputs.len());
                for (x, &need) in inputs.iter().zip(needs) {
                    let n = x.len();
                    out.push(need.then(|| {
                        Tensor::from_parts(x.shape().to_vec(), grad.data()[offset..offset + n].to_vec())
                    }));
                    offset += n;
                }
                out
            }
            Op::Opaque(name) => {
                return Err(Error::Internal(format!(
                    "no backward rule registered for op `{name}`"
                )))
            }
            Op::Upsample(weights) => vec![Some(signal::upsample_backward(inputs[0], weights, grad))],
            Op::StftMag(cache) => vec![Some(signal::stft_backward(cache, grad))],
            Op::IdctRows(table) => vec![Some(signal::idct_rows_backward(table, grad))],
            Op::Conv1d => signal::conv1d_backward(inputs, grad, needs),
            Op::FrameConvolve { frame_size } => {
                signal::frame_convolve_backward(inputs, grad, needs, *frame_size)
            }
            Op::OscillatorBank(cfg) => signal::oscillator_backward(inputs, grad, needs, cfg),
        })
    }
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return config_err(format!("cannot broadcast {a:?} with {b:?}")),
        };
    }
    Ok(out)
}

/// Input offset for each flat output index under broadcasting.
fn broadcast_offsets(out: &[usize], input: &[usize]) -> Option<Vec<usize>> {
    if out == input {
        return None;
    }
    let rank = out.len();
    let mut strides = vec![0; rank];
    let mut stride = 1;
    for i in (0..input.len()).rev() {
        let o = i + rank - input.len();
        strides[o] = if input[i] == 1 { 0 } else { stride };
        stride *= input[i];
    }
    let total: usize = out.iter().product();
    let mut offsets = Vec::with_capacity(total);
    let mut idx = vec![0; rank];
    for _ in 0..total {
        offsets.push(idx.iter().zip(&strides).map(|(i, s)| i * s).sum());
        for d in (0..rank).rev() {
            idx[d] += 1;
            if idx[d] < out[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Some(offsets)
}

fn binary_forward(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    let shape = broadcast_shape(a.shape(), b.shape())?;
    let oa = broadcast_offsets(&shape, a.shape());
    let ob = broadcast_offsets(&shape, b.shape());
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|i| {
            let x = a.data()[oa.as_ref().map_or(i, |o| o[i])];
            let y = b.data()[ob.as_ref().map_or(i, |o| o[i])];
            f(x, y)
        })
        .collect();
    Ok(Tensor::from_parts(shape, data))
}

fn binary_backward(
    inputs: &[&Tensor],
    grad: &Tensor,
    needs: &[bool],
    partials: impl Fn(f64, f64) -> (f64, f64),
) -> Vec<Option<Tensor>> {
    let (a, b) = (inputs[0], inputs[1]);
    let oa = broadcast_offsets(grad.shape(), a.shape());
    let ob = broadcast_offsets(grad.shape(), b.shape());
    let mut ga = vec![0.0; a.len()];
    let mut gb = vec![0.0; b.len()];
    for (i, &g) in grad.data().iter().enumerate() {
        let ia = oa.as_ref().map_or(i, |o| o[i]);
        let ib = ob.as_ref().map_or(i, |o| o[i]);
        let (da, db) = partials(a.data()[ia], b.data()[ib]);
        ga[ia] += g * da;
        gb[ib] += g * db;
    }
    vec![
        needs[0].then(|| Tensor::from_parts(a.shape().to_vec(), ga)),
        needs[1].then(|| Tensor::from_parts(b.shape().to_vec(), gb)),
    ]
}

fn as_matrix(t: &Tensor) -> (usize, usize) {
    match t.shape() {
        [r, c] => (*r, *c),
        [c] => (1, *c),
        _ => (1, 1),
    }
}

/// `op(a) * op(b)` for rank-2 tensors, optionally transposing either side.
pub(crate) fn matmul_raw(a: &Tensor, ta: bool, b: &Tensor, tb: bool) -> Tensor {
    let (ar, ac) = as_matrix(a);
    let (br, bc) = as_matrix(b);
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let n = if tb { br } else { bc };
    let ad = a.data();
    let bd = b.data();
    let mut out = vec![0.0; m * n];
    // b laid out as [k x n] for the inner loop
    let b_kn: std::borrow::Cow<[f64]> = if tb {
        let mut t = vec![0.0; k * n];
        for i in 0..br {
            for j in 0..bc {
                t[j * n + i] = bd[i * bc + j];
            }
        }
        t.into()
    } else {
        bd.into()
    };
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = if ta { ad[p * ac + i] } else { ad[i * ac + p] };
            if av == 0.0 {
                continue;
            }
            for (o, bv) in row.iter_mut().zip(&b_kn[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    Tensor::from_parts(vec![m, n], out)
}

fn transpose_raw(t: &Tensor) -> Tensor {
    let (r, c) = as_matrix(t);
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = t.data()[i * c + j];
        }
    }
    Tensor::from_parts(vec![c, r], out)
}

#[allow(clippy::should_implement_trait)]
impl<'t> Var<'t> {
    fn unary(self, op: Op, f: impl Fn(f64) -> f64) -> Var<'t> {
        let value = self.value().map(f);
        self.tape.push(value, op, &[self])
    }

    fn binary(self, other: Var<'t>, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var<'t>> {
        let value = binary_forward(&self.value(), &other.value(), f)?;
        Ok(self.tape.push(value, op, &[self, other]))
    }

    /// Elementwise sum with broadcasting.
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Add, |a, b| a + b)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Sub, |a, b| a - b)
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Mul, |a, b| a * b)
    }

    pub fn div(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Div, |a, b| a / b)
    }

    pub fn scale(self, s: f64) -> Var<'t> {
        self.unary(Op::Scale(s), |x| s * x)
    }

    pub fn offset(self, c: f64) -> Var<'t> {
        self.unary(Op::Offset, |x| x + c)
    }

    pub fn neg(self) -> Var<'t> {
        self.unary(Op::Neg, |x| -x)
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(Op::Sin, f64::sin)
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(Op::Cos, f64::cos)
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Op::Exp, f64::exp)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(Op::Ln, f64::ln)
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(Op::Sigmoid, sigmoid)
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(Op::Tanh, f64::tanh)
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(Op::Relu, |x| x.max(0.0))
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'t> {
        self.unary(Op::LeakyRelu(slope), move |x| if x > 0.0 { x } else { slope * x })
    }

    pub fn abs(self) -> Var<'t> {
        self.unary(Op::Abs, f64::abs)
    }

    pub fn square(self) -> Var<'t> {
        self.unary(Op::Square, |x| x * x)
    }

    pub fn sqrt(self) -> Var<'t> {
        self.unary(Op::Sqrt, f64::sqrt)
    }

    pub fn powf(self, p: f64) -> Var<'t> {
        self.unary(Op::Powf(p), move |x| x.powf(p))
    }

    /// Matrix product of rank-2 tensors (vectors count as a single row).
    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        let (_, ac) = as_matrix(&a);
        let (br, _) = as_matrix(&b);
        if a.rank() > 2 || b.rank() > 2 || ac != br {
            return config_err(format!("matmul {:?} x {:?}", a.shape(), b.shape()));
        }
        let value = matmul_raw(&a, false, &b, false);
        Ok(self.tape.push(value, Op::Matmul, &[self, other]))
    }

    pub fn t(self) -> Result<Var<'t>> {
        let value = self.value();
        if value.rank() != 2 {
            return config_err("transpose needs a matrix");
        }
        let out = transpose_raw(&value);
        Ok(self.tape.push(out, Op::Transpose, &[self]))
    }

    pub fn sum(self) -> Var<'t> {
        let value = Tensor::scalar(self.value().sum());
        self.tape.push(value, Op::Sum, &[self])
    }

    pub fn mean(self) -> Var<'t> {
        let v = self.value();
        let value = Tensor::scalar(v.sum() / v.len() as f64);
        self.tape.push(value, Op::Mean, &[self])
    }

    fn reduce_last(self, mean: bool) -> Var<'t> {
        let v = self.value();
        let cols = v.cols();
        let data: Vec<f64> = v
            .data()
            .chunks(cols)
            .map(|r| {
                let s: f64 = r.iter().sum();
                if mean {
                    s / cols as f64
                } else {
                    s
                }
            })
            .collect();
        let shape = v.shape()[..v.rank().saturating_sub(1)].to_vec();
        let op = if mean { Op::MeanLast } else { Op::SumLast };
        self.tape.push(Tensor::from_parts(shape, data), op, &[self])
    }

    /// Sum over the last axis.
    pub fn sum_last(self) -> Var<'t> {
        self.reduce_last(false)
    }

    /// Mean over the last axis.
    pub fn mean_last(self) -> Var<'t> {
        self.reduce_last(true)
    }

    /// Divides each row by its sum; rows summing to zero map to zero.
    pub fn normalize_rows(self) -> Var<'t> {
        let v = self.value();
        let cols = v.cols();
        let mut data = v.data().to_vec();
        for row in data.chunks_mut(cols) {
            let total: f64 = row.iter().sum();
            if total == 0.0 {
                row.iter_mut().for_each(|x| *x = 0.0);
            } else {
                row.iter_mut().for_each(|x| *x /= total);
            }
        }
        let value = Tensor::from_parts(v.shape().to_vec(), data);
        self.tape.push(value, Op::NormalizeRows, &[self])
    }

    /// Inclusive running sum over the flattened values.
    pub fn cumsum(self) -> Var<'t> {
        let v = self.value();
        let mut acc = 0.0;
        let data = v
            .data()
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        let value = Tensor::from_parts(v.shape().to_vec(), data);
        self.tape.push(value, Op::Cumsum, &[self])
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let v = self.value();
        let value = Tensor::new(shape.to_vec(), v.data().to_vec())?;
        Ok(self.tape.push(value, Op::Reshape, &[self]))
    }

    /// Columns `start..end` of a matrix (or elements of a vector).
    pub fn slice_cols(self, start: usize, end: usize) -> Result<Var<'t>> {
        let v = self.value();
        let cols = v.cols();
        if start >= end || end > cols || v.rank() == 0 {
            return config_err(format!("slice_cols {start}..{end} of {:?}", v.shape()));
        }
        let data = v
            .data()
            .chunks(cols)
            .flat_map(|r| r[start..end].iter().copied())
            .collect();
        let mut shape = v.shape().to_vec();
        *shape.last_mut().expect("rank checked") = end - start;
        let value = Tensor::from_parts(shape, data);
        Ok(self.tape.push(value, Op::SliceCols { start, end }, &[self]))
    }

    /// Rows `start..end` of a matrix.
    pub fn slice_rows(self, start: usize, end: usize) -> Result<Var<'t>> {
        let v = self.value();
        if v.rank() != 2 || start >= end || end > v.rows() {
            return config_err(format!("slice_rows {start}..{end} of {:?}", v.shape()));
        }
        let cols = v.cols();
        let value = Tensor::from_parts(
            vec![end - start, cols],
            v.data()[start * cols..end * cols].to_vec(),
        );
        Ok(self.tape.push(value, Op::SliceRows { start }, &[self]))
    }

    /// Concatenation along the last axis of equally-tall matrices.
    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Config("concat of nothing".into()))?;
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let rows = values[0].rows();
        if values.iter().any(|v| v.rank() != 2 || v.rows() != rows) {
            return config_err("concat_cols needs matrices with equal row counts");
        }
        let total: usize = values.iter().map(|v| v.cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for v in &values {
                let c = v.cols();
                data.extend_from_slice(&v.data()[r * c..(r + 1) * c]);
            }
        }
        let value = Tensor::from_parts(vec![rows, total], data);
        Ok(first.tape.push(value, Op::ConcatCols, parts))
    }

    /// Concatenation along the first axis of equally-wide matrices.
    pub fn concat_rows(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Config("concat of nothing".into()))?;
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let cols = values[0].cols();
        if values.iter().any(|v| v.rank() != 2 || v.cols() != cols) {
            return config_err("concat_rows needs matrices with equal column counts");
        }
        let rows: usize = values.iter().map(|v| v.rows()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for v in &values {
            data.extend_from_slice(v.data());
        }
        let value = Tensor::from_parts(vec![rows, cols], data);
        Ok(first.tape.push(value, Op::ConcatRows, parts))
    }

    /// Same value, no gradient flows back.
    pub fn detach(self) -> Var<'t> {
        let value = (*self.value()).clone();
        self.tape.push(value, Op::Detach, &[self])
    }

    /// Forward-only elementwise map. Backpropagating through it fails.
    pub fn map_opaque(self, name: &'static str, f: impl Fn(f64) -> f64) -> Var<'t> {
        self.unary(Op::Opaque(name), f)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
