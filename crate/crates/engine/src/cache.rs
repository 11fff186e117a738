//! Feature cache: one `.feat` file per clip plus an `index.json`.
//!
//! A `.feat` file is the 8-byte magic, a little-endian u64 header length, a
//! JSON header, then the arrays named in the header as little-endian f32.

use crate::audio::ingest_bytes;
use crate::dataset::{wav_files, Dataset, Split};
use crate::error::{Error, Result};
use ddsp_sfx_core::features::{analyze, ControlFrames, MelSpec, PitchTrack};
use ddsp_sfx_core::model::TrainingExample;
use ddsp_sfx_core::{AudioClip, FrameConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

pub const FEATURE_MAGIC: &[u8; 8] = b"DDSPFEAT";
pub const FEATURE_SCHEMA: u32 = 1;
pub const INDEX_FILE: &str = "index.json";

const ARRAYS: [&str; 7] = ["f0", "confidence", "harmonic", "loudness", "onset", "mel", "audio"];

/// Analysis of one clip as stored in the cache.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub source_hash: String,
    pub frame: FrameConfig,
    pub pitch: PitchTrack,
    pub controls: ControlFrames,
    pub mel: MelSpec,
    pub audio: AudioClip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FeatureHeader {
    schema_version: u32,
    id: String,
    source_hash: String,
    frame: FrameConfig,
    mel_bands: usize,
    arrays: Vec<ArrayEntry>,
}

impl FeatureRecord {
    pub fn to_example(&self) -> TrainingExample {
        TrainingExample {
            audio: self.audio.clone(),
            mel: self.mel.clone(),
            controls: self.controls.clone(),
        }
    }

    fn arrays(&self) -> [&[f64]; 7] {
        [
            &self.pitch.f0,
            &self.pitch.confidence,
            &self.controls.harmonic,
            &self.controls.loudness,
            &self.controls.onset,
            &self.mel.data,
            self.audio.samples(),
        ]
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = FeatureHeader {
            schema_version: FEATURE_SCHEMA,
            id: self.id.clone(),
            source_hash: self.source_hash.clone(),
            frame: self.frame,
            mel_bands: self.mel.bands,
            arrays: ARRAYS
                .iter()
                .zip(self.arrays())
                .map(|(name, a)| ArrayEntry {
                    name: name.to_string(),
                    len: a.len(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + json.len() + 4 * header.arrays.iter().map(|a| a.len).sum::<usize>());
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for a in self.arrays() {
            for v in a {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |m: String| Error::Core(ddsp_sfx_core::Error::Format(m));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != FEATURE_MAGIC {
            return Err(bad("not a feature file".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len);
        if len > 1 << 20 {
            return Err(bad(format!("implausible header length {len}")));
        }
        let mut json = vec![0u8; len as usize];
        r.read_exact(&mut json)?;
        let header: FeatureHeader = serde_json::from_slice(&json)?;
        if header.schema_version != FEATURE_SCHEMA {
            return Err(Error::Core(ddsp_sfx_core::Error::Version(format!(
                "feature schema {} (this build reads {FEATURE_SCHEMA})",
                header.schema_version
            ))));
        }
        let names: Vec<&str> = header.arrays.iter().map(|a| a.name.as_str()).collect();
        if names != ARRAYS {
            return Err(bad(format!("unexpected arrays {names:?}")));
        }
        let mut arrays = Vec::with_capacity(ARRAYS.len());
        for entry in &header.arrays {
            let mut raw = vec![0u8; entry.len * 4];
            r.read_exact(&mut raw)
                .map_err(|e| bad(format!("truncated array {}: {e}", entry.name)))?;
            arrays.push(
                raw.chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                    .collect::<Vec<f64>>(),
            );
        }
        let mut it = arrays.into_iter();
        let mut next = || it.next().expect("array count checked");
        let (f0, confidence, harmonic, loudness, onset, mel, audio) =
            (next(), next(), next(), next(), next(), next(), next());
        let frame = header.frame;
        let mel = MelSpec {
            bands: header.mel_bands,
            frames: frame.frame_count,
            data: mel,
        };
        if mel.data.len() != mel.bands * mel.frames {
            return Err(bad("mel array has the wrong size".into()));
        }
        let controls = ControlFrames {
            f0: f0.clone(),
            loudness,
            onset,
            harmonic,
            z: None,
        };
        controls.validate(&frame)?;
        let audio = AudioClip::new(audio, frame.sample_rate)?;
        audio.check_config(&frame)?;
        Ok(Self {
            id: header.id,
            source_hash: header.source_hash,
            frame,
            pitch: PitchTrack { f0, confidence },
            controls,
            mel,
            audio,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_from(std::io::BufReader::new(file)).map_err(|e| Error::file(path, e))
    }
}

/// Hex SHA-256 of the source bytes together with the frame layout.
pub fn content_hash(bytes: &[u8], frame: &FrameConfig) -> String {
    let mut h = Sha256::new();
    h.update(format!("feat{FEATURE_SCHEMA}:{}:{}:{}:", frame.frame_size, frame.frame_count, frame.sample_rate));
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Ingest and analyze raw WAV bytes.
pub fn compute_record(id: &str, bytes: &[u8], frame: &FrameConfig) -> Result<FeatureRecord> {
    let audio = ingest_bytes(bytes, frame)?;
    let analysis = analyze(&audio, frame)?;
    Ok(FeatureRecord {
        id: id.to_string(),
        source_hash: content_hash(bytes, frame),
        frame: *frame,
        pitch: analysis.pitch,
        controls: analysis.controls,
        mel: analysis.mel,
        audio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub source: PathBuf,
    pub source_hash: String,
    pub split: Split,
    /// Relative to the cache directory.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CacheIndex {
    pub schema_version: u32,
    pub seed: u64,
    pub entries: Vec<IndexEntry>,
}

impl CacheIndex {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(INDEX_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::file(&path, e))
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(INDEX_FILE);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).map_err(|e| Error::file(&path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PreprocessSummary {
    pub computed: Vec<String>,
    pub reused: Vec<String>,
    pub failed: Vec<(PathBuf, String)>,
}

/// Analyzes every WAV in `input` into `cache`, skipping clips whose content
/// hash already has a record. A failing file is logged and left out.
pub fn preprocess(input: &Path, cache: &Path, frame: &FrameConfig, seed: u64) -> Result<PreprocessSummary> {
    std::fs::create_dir_all(cache).map_err(|e| Error::file(cache, e))?;
    let previous: BTreeMap<String, IndexEntry> = CacheIndex::load(cache)
        .map(|idx| idx.entries.into_iter().map(|e| (e.id.clone(), e)).collect())
        .unwrap_or_default();
    let dataset = Dataset::from_paths(wav_files(input)?, seed);
    let mut summary = PreprocessSummary::default();
    let mut entries = Vec::new();
    for rec in &dataset.records {
        let bytes = match std::fs::read(&rec.path) {
            Ok(b) => b,
            Err(e) => {
                log::error!("{}: {e}", rec.path.display());
                summary.failed.push((rec.path.clone(), e.to_string()));
                continue;
            }
        };
        let hash = content_hash(&bytes, frame);
        let file = format!("{}.feat", rec.id);
        let fresh = previous
            .get(&rec.id)
            .is_some_and(|p| p.source_hash == hash && cache.join(&p.file).is_file());
        if fresh {
            summary.reused.push(rec.id.clone());
        } else {
            match compute_record(&rec.id, &bytes, frame).and_then(|r| r.to_bytes()) {
                Ok(out) => {
                    let path = cache.join(&file);
                    std::fs::write(&path, out).map_err(|e| Error::file(&path, e))?;
                    log::info!("analyzed {}", rec.id);
                    summary.computed.push(rec.id.clone());
                }
                Err(e) => {
                    log::error!("{}: {e}", rec.path.display());
                    summary.failed.push((rec.path.clone(), e.to_string()));
                    continue;
                }
            }
        }
        entries.push(IndexEntry {
            id: rec.id.clone(),
            source: rec.path.clone(),
            source_hash: hash,
            split: rec.split,
            file,
        });
    }
    CacheIndex {
        schema_version: FEATURE_SCHEMA,
        seed,
        entries,
    }
    .save(cache)?;
    Ok(summary)
}

/// Records of one split, in index order.
pub fn load_split(cache: &Path, split: Split) -> Result<Vec<FeatureRecord>> {
    let index = CacheIndex::load(cache)?;
    index
        .entries
        .iter()
        .filter(|e| e.split == split)
        .map(|e| FeatureRecord::load(&cache.join(&e.file)))
        .collect()
}

