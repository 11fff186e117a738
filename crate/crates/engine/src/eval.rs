use crate::audio::ingest;
use crate::dataset::{clip_id, wav_files};
use crate::error::Result;
use ddsp_sfx_core::metrics::{frechet_distance, EmbeddingSet, MetricReport, PairMetrics};
use ddsp_sfx_core::FrameConfig;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Embedding files for the reference and generated sets.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFiles {
    pub reference: PathBuf,
    pub generated: PathBuf,
}

/// Pairs WAV files by name across the two directories. Names present on
/// only one side are reported as skipped.
pub fn evaluate_corpus(
    reference: &Path,
    generated: &Path,
    embeddings: Option<&EmbeddingFiles>,
    frame: &FrameConfig,
) -> Result<MetricReport> {
    let by_id = |dir: &Path| -> Result<BTreeMap<String, PathBuf>> {
        Ok(wav_files(dir)?.into_iter().map(|p| (clip_id(&p), p)).collect())
    };
    let refs = by_id(reference)?;
    let gens = by_id(generated)?;
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for (id, ref_path) in &refs {
        match gens.get(id) {
            Some(gen_path) => {
                let a = ingest(ref_path, frame)?;
                let b = ingest(gen_path, frame)?;
                pairs.push(PairMetrics::compute(id.clone(), &a, &b)?);
            }
            None => skipped.push(id.clone()),
        }
    }
    skipped.extend(gens.keys().filter(|id| !refs.contains_key(*id)).cloned());
    skipped.sort();
    if pairs.is_empty() {
        log::warn!("no file names in common between {} and {}", reference.display(), generated.display());
    }
    let frechet = match embeddings {
        Some(files) => {
            let a = EmbeddingSet::load(&files.reference)?;
            let b = EmbeddingSet::load(&files.generated)?;
            Some(frechet_distance(&a, &b)?)
        }
        None => None,
    };
    Ok(MetricReport::new(pairs, skipped, frechet))
}
