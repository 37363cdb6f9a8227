//! Model checkpoints: a JSON manifest plus one raw little-endian f64 blob
//! per tensor, all inside one directory.

use std::path::{Path, PathBuf};

use eegattn_core::neural::ParamStore;
use eegattn_core::seqlabel::{SeqModel, SeqModelConfig, Vocab};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

pub const SCHEMA: &str = "checkpoint/1";
pub const MANIFEST: &str = "checkpoint.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub schema: String,
    pub seed: u64,
    /// Optimiser updates applied to reach these parameters.
    pub step: u64,
    pub tensors: Vec<TensorEntry>,
    pub config: SeqModelConfig,
    pub vocab: Vocab,
}

fn blob_name(i: usize, name: &str) -> String {
    let safe: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' { c } else { '-' })
        .collect();
    format!("{i:02}-{safe}.bin")
}

/// Writes the checkpoint and returns the paths of every file written.
pub fn save(dir: &Path, model: &SeqModel, step: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut tensors = Vec::new();
    for (i, (name, id)) in model.store.iter().enumerate() {
        let file = blob_name(i, name);
        let bytes: Vec<u8> = model.store.value(id).iter().flat_map(|v| v.to_le_bytes()).collect();
        let path = dir.join(&file);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        tensors.push(TensorEntry {
            name: name.to_string(),
            rows: id.rows,
            cols: id.cols,
            file,
        });
    }
    let manifest = CheckpointManifest {
        schema: SCHEMA.into(),
        seed: model.store.seed(),
        step,
        tensors,
        config: model.config.clone(),
        vocab: model.vocab.clone(),
    };
    let path = dir.join(MANIFEST);
    jsonl::write_json(&path, &manifest)?;
    written.push(path);
    Ok(written)
}

pub fn load(dir: &Path) -> Result<(SeqModel, CheckpointManifest)> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Err(Error::MissingArtifact { path, producer: "train" });
    }
    let manifest: CheckpointManifest = jsonl::read_json(&path)?;
    if manifest.schema != SCHEMA {
        return Err(Error::Format(format!("unsupported checkpoint schema {:?}", manifest.schema)));
    }
    let mut values = Vec::new();
    let mut shapes = Vec::new();
    for t in &manifest.tensors {
        let p = dir.join(&t.file);
        let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
        if bytes.len() != t.rows * t.cols * 8 {
            return Err(Error::Format(format!(
                "{}: expected {} values, found {} bytes",
                p.display(),
                t.rows * t.cols,
                bytes.len()
            )));
        }
        values.extend(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))));
        shapes.push((t.name.clone(), t.rows, t.cols));
    }
    let store = ParamStore::from_parts(manifest.seed, shapes, values)
        .ok_or_else(|| Error::Format("tensor shapes do not match value count".into()))?;
    let model = SeqModel::from_store(manifest.config.clone(), manifest.vocab.clone(), store)?;
    Ok((model, manifest))
}
