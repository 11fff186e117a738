//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every operation in execution order together with its
//! inputs. [`Tape::backward`] walks the records in exact reverse and applies
//! each op's backward rule. Besides elementwise maths and linear algebra the
//! primitive set covers the signal operations the synthesizers and the
//! spectral loss are built from: linear upsampling, cumulative sums, STFT
//! magnitude, row-wise DCT-III, 1-D convolution, overlap-add frame filtering
//! and the additive oscillator bank.

mod ops;
mod signal;
mod tape;
mod tensor;

pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

