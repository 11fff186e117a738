use crate::cache::load_split;
use crate::config::RunConfig;
use crate::dataset::Split;
use crate::error::{Error, Result};
use ddsp_sfx_core::model::{Checkpoint, LossReport, Trainer, TrainingExample};
use ddsp_sfx_core::FrameConfig;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Indices of the clips used at `step`; without replacement when the set is large enough.
pub fn batch_indices(step: u64, batch_size: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6261_7463_6865_7321);
    rng.set_stream(step);
    if batch_size <= n {
        index::sample(&mut rng, n, batch_size).into_vec()
    } else {
        let all: Vec<usize> = (0..n).collect();
        (0..batch_size).map(|_| *all.choose(&mut rng).expect("non-empty")).collect()
    }
}

/// Runs every remaining step, appending one JSON line per step to `log`
/// and saving to `out` every `checkpoint_every` steps and at the end.
pub fn run_training(
    cfg: &RunConfig,
    frame: FrameConfig,
    examples: &[TrainingExample],
    out: &Path,
    mut log: impl Write,
    mut on_report: impl FnMut(&LossReport),
) -> Result<Vec<LossReport>> {
    if examples.is_empty() {
        return Err(Error::Config("no training clips".into()));
    }
    let mut trainer = Trainer::new(cfg.model.clone(), cfg.train.clone(), frame)?;
    let mut reports = Vec::with_capacity(cfg.train.total_steps as usize);
    while !trainer.is_done() {
        let idx = batch_indices(trainer.step(), cfg.train.batch_size, examples.len(), cfg.train.seed);
        let batch: Vec<TrainingExample> = idx.iter().map(|&i| examples[i].clone()).collect();
        let report = trainer.train_step(&batch)?;
        serde_json::to_writer(&mut log, &report)?;
        log.write_all(b"\n")?;
        on_report(&report);
        reports.push(report);
        let step = trainer.step();
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && !trainer.is_done() {
            save(&trainer, frame, out)?;
            trainer.mark_checkpoint();
        }
    }
    log.flush()?;
    save(&trainer, frame, out)?;
    Ok(reports)
}

fn save(trainer: &Trainer, frame: FrameConfig, out: &Path) -> Result<()> {
    Checkpoint {
        model: trainer.model_config().clone(),
        train: trainer.train_config().clone(),
        frame,
        step: trainer.step(),
        params: trainer.params().clone(),
    }
    .save(out)
    .map_err(|e| Error::file(out, e))
}

/// Default location of the loss log next to a checkpoint.
pub fn log_path(out: &Path) -> PathBuf {
    out.with_extension("log.jsonl")
}

/// Trains on the training split of a feature cache.
pub fn train_from_cache(cfg: &RunConfig, cache: &Path, out: &Path) -> Result<Vec<LossReport>> {
    let records = load_split(cache, Split::Train)?;
    let Some(first) = records.first() else {
        return Err(Error::Config(format!("{} holds no training clips", cache.display())));
    };
    let frame = first.frame;
    if records.iter().any(|r| r.frame != frame) {
        return Err(Error::Config("cache mixes frame layouts".into()));
    }
    let examples: Vec<TrainingExample> = records.iter().map(|r| r.to_example()).collect();
    let log_file = log_path(out);
    let log = std::fs::File::create(&log_file).map_err(|e| Error::file(&log_file, e))?;
    log::info!("training on {} clips, logging to {}", examples.len(), log_file.display());
    run_training(cfg, frame, &examples, out, std::io::BufWriter::new(log), |r| {
        if r.step % 50 == 0 {
            log::info!("step {} loss {:.4} rec {:.4} reg {:.4}", r.step, r.loss, r.rec, r.reg);
        }
    })
}
