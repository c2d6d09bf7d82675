//! Binary checkpoint: the 8-byte magic, a little-endian `u64` header length,
//! a JSON header describing config, labels, vocabulary and tensor layout,
//! then every tensor as little-endian `f32`.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, Result, Tagger, Vocabulary};
use crate::schema::LabelSpace;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"UDATCKPT";
const FORMAT: &str = "udat-tagger";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// In `f32` elements from the start of the data section.
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: ModelConfig,
    labels: LabelSpace,
    vocab: Vocabulary,
    tensors: Vec<TensorEntry>,
}

impl Tagger {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut offset = 0;
        let mut data = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape, values) in self.params.tensors() {
            tensors.push(TensorEntry {
                name: name.to_string(),
                shape,
                offset,
            });
            offset += values.len();
            for &v in values {
                data.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            config: self.config.clone(),
            labels: self.labels.clone(),
            vocab: self.vocab.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + data.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&data);
        out
    }

    /// Parses a checkpoint; every tensor shape must match the skeleton its
    /// config describes.
    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Tagger, String> {
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err("not a checkpoint (bad magic)".into());
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let json = bytes.get(16..16 + len).ok_or("truncated header")?;
        let header: Header = serde_json::from_slice(json).map_err(|e| format!("bad header: {e}"))?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(format!("unsupported format {} v{}", header.format, header.version));
        }
        let data = &bytes[16 + len..];
        let dim = header.config.embedding_dim;
        let mut tagger = Tagger::with_embeddings(
            header.config,
            header.labels,
            header.vocab.clone(),
            Array2::zeros((header.vocab.len(), dim)),
        )
        .map_err(|e| e.to_string())?;
        let expected: Vec<(&str, Vec<usize>)> =
            tagger.params.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
        if header.tensors.len() != expected.len() {
            return Err(format!("{} tensors, expected {}", header.tensors.len(), expected.len()));
        }
        for (entry, (name, shape)) in header.tensors.iter().zip(&expected) {
            if entry.name != *name || entry.shape != *shape {
                return Err(format!(
                    "tensor {} has shape {:?}, model expects {} with shape {:?}",
                    entry.name, entry.shape, name, shape
                ));
            }
        }
        for (entry, slot) in header.tensors.iter().zip(tagger.params.tensors_mut()) {
            let start = entry.offset * 4;
            let raw = data
                .get(start..start + slot.len() * 4)
                .ok_or_else(|| format!("tensor {} truncated", entry.name))?;
            for (v, chunk) in slot.iter_mut().zip(raw.chunks_exact(4)) {
                *v = f64::from(f32::from_le_bytes(chunk.try_into().expect("4 bytes")));
            }
        }
        Ok(tagger)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let io = |source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        };
        fs::write(&tmp, self.to_bytes()).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Tagger> {
        let bytes = fs::read(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Tagger::from_bytes(&bytes).map_err(|message| ModelError::Checkpoint {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Loads and additionally requires the stored config to equal `expected`.
    pub fn load_expecting(path: &Path, expected: &ModelConfig) -> Result<Tagger> {
        let t = Tagger::load(path)?;
        if &t.config != expected {
            return Err(ModelError::Checkpoint {
                path: path.to_path_buf(),
                message: format!("config mismatch: stored {:?}, expected {:?}", t.config, expected),
            });
        }
        Ok(t)
    }
}
