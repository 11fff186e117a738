use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Fraction of clips held out for testing, as a divisor.
const TEST_DIVISOR: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub id: String,
    pub path: PathBuf,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<ClipRecord>,
}

/// `.wav` files directly inside `dir`, sorted by name.
pub fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::file(dir, e))? {
        let path = entry?.path();
        let is_wav = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if is_wav && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn clip_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

impl Dataset {
    /// Every `.wav` in `dir` with a seeded 90/10 train/test split.
    pub fn scan(dir: &Path, seed: u64) -> Result<Self> {
        Ok(Self::from_paths(wav_files(dir)?, seed))
    }

    /// Records come back in id order; the split depends only on the ids and `seed`.
    pub fn from_paths(paths: Vec<PathBuf>, seed: u64) -> Self {
        let mut records: Vec<ClipRecord> = paths
            .into_iter()
            .map(|path| ClipRecord {
                id: clip_id(&path),
                path,
                split: Split::Train,
            })
            .collect();
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for &i in order.iter().take(records.len() / TEST_DIVISOR) {
            records[i].split = Split::Test;
        }
        Self { records }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ClipRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paths(n: usize) -> Vec<PathBuf> {
        (0..n).map(|i| PathBuf::from(format!("clip{i:03}.wav"))).collect()
    }

    #[test]
    fn split_is_ninety_ten_deterministic_and_disjoint() {
        let a = Dataset::from_paths(paths(50), 7);
        let mut reversed = paths(50);
        reversed.reverse();
        let b = Dataset::from_paths(reversed, 7);
        assert_eq!(a, b);
        assert_eq!(a.split(Split::Test).count(), 5);
        assert_eq!(a.split(Split::Train).count(), 45);
        let c = Dataset::from_paths(paths(50), 8);
        assert_ne!(a, c);
    }

    #[test]
    fn tiny_sets_train_on_everything() {
        let d = Dataset::from_paths(paths(3), 0);
        assert_eq!(d.split(Split::Train).count(), 3);
    }
}
