//! Differentiable sound-effects synthesis.
//!
//! - [`dsp`]: harmonic, filtered-noise and DCT-domain transient synthesizers
//! - [`features`]: pitch/confidence, harmonic indicator, loudness, mel
//!   spectrogram, HPSS and onset analysis
//! - [`autodiff`]: tape-based reverse-mode differentiation
//! - [`model`]: VAE encoder, decoder, losses, schedules, optimizer, training
//! - [`metrics`]: log-spectral, multi-scale STFT and Fréchet distances

pub mod autodiff;
pub mod dsp;
pub mod error;
pub mod features;
pub mod metrics;
pub mod model;
pub mod spectral;

pub use dsp::{AudioClip, FrameConfig, SynthParams};
pub use error::{Error, Result};
