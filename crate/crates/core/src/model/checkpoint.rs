//! Checkpoint file: 8-byte magic, little-endian u64 header length, JSON
//! header, then every tensor as little-endian f32 in header order.

use super::{ModelConfig, ParamStore, TrainConfig};
use crate::autodiff::Tensor;
use crate::dsp::FrameConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DDSPSFXC";
pub const CHECKPOINT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub frame: FrameConfig,
    pub step: u64,
    pub seed: u64,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub frame: FrameConfig,
    pub step: u64,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = CheckpointHeader {
            schema_version: CHECKPOINT_SCHEMA,
            model: self.model.clone(),
            train: self.train.clone(),
            frame: self.frame,
            step: self.step,
            seed: self.train.seed,
            tensors: self
                .params
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        let mut payload = Vec::with_capacity(self.params.scalar_count() * 4);
        for (_, t) in self.params.iter() {
            for v in t.data() {
                payload.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        w.write_all(&payload)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len);
        if len > 1 << 26 {
            return Err(Error::Format(format!("implausible header length {len}")));
        }
        let mut json = vec![0u8; len as usize];
        r.read_exact(&mut json)?;
        let header: CheckpointHeader = serde_json::from_slice(&json)?;
        if header.schema_version != CHECKPOINT_SCHEMA {
            return Err(Error::Version(format!(
                "checkpoint schema {} (this build reads {CHECKPOINT_SCHEMA})",
                header.schema_version
            )));
        }
        let mut tensors = BTreeMap::new();
        for entry in &header.tensors {
            let n: usize = entry.shape.iter().product();
            let mut raw = vec![0u8; n * 4];
            r.read_exact(&mut raw)
                .map_err(|e| Error::Format(format!("truncated tensor {}: {e}", entry.name)))?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            tensors.insert(entry.name.clone(), Tensor::new(entry.shape.clone(), data)?);
        }
        let params = ParamStore::from_tensors(tensors);
        params
            .check_layout(&header.model)
            .map_err(|e| Error::Version(format!("tensors do not match the stored model config: {e}")))?;
        Ok(Self {
            model: header.model,
            train: header.train,
            frame: header.frame,
            step: header.step,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
