//! Run manifests written next to every output as `<out>.manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    /// Every resolved option, as text.
    pub config: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Digests of a file, or of every file below a directory in sorted order.
pub fn digests(path: &Path) -> Result<Vec<FileDigest>> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(path, err)))
            .collect::<Result<_>>()?;
        entries.sort();
        let mut out = Vec::new();
        for e in entries {
            out.extend(digests(&e)?);
        }
        Ok(out)
    } else {
        Ok(vec![FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        }])
    }
}

/// Current unix time, or `SOURCE_DATE_EPOCH` when set so that manifests of
/// reproducible runs are byte-identical.
pub fn unix_now() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Collects a run's provenance while it executes.
#[derive(Debug, Clone)]
pub struct ManifestBuilder {
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, config: BTreeMap<String, String>, seeds: Vec<u64>) -> Self {
        Self {
            manifest: RunManifest {
                subcommand: subcommand.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                config,
                seeds,
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_unix: unix_now(),
                finished_unix: 0,
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.inputs.extend(digests(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.manifest.outputs.extend(digests(path)?);
        Ok(())
    }

    /// Writes `<out>.manifest.json` and returns its path.
    pub fn finish(mut self, out: &Path) -> Result<PathBuf> {
        self.manifest.finished_unix = unix_now();
        let path = manifest_path(out);
        jsonl::write_json(&path, &self.manifest)?;
        Ok(path)
    }
}
