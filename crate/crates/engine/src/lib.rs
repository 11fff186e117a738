//! Orchestration around `ddsp-sfx-core`: WAV ingestion, the feature cache,
//! the training driver, synthesis with timbre control, corpus evaluation
//! and the HTTP service.

pub mod audio;
pub mod cache;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod server;
pub mod synth;
pub mod training;

pub use error::{Error, Result};

use ddsp_sfx_core::model::{Checkpoint, Model};
use std::path::Path;

/// Model and the step it was saved at. Schema or layout mismatches surface
/// as the core version error.
pub fn load_model(path: &Path) -> Result<(Model, u64)> {
    let ck = Checkpoint::load(path)?;
    let step = ck.step;
    Ok((Model::from_checkpoint(ck)?, step))
}
