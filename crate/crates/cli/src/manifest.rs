//! Per-stage record of what went in and what came out.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use platefit::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the configuration file as read.
    pub config_hash: String,
    /// Command-line values that replaced configuration entries.
    pub overrides: BTreeMap<String, String>,
    pub model_fingerprint: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub notes: BTreeMap<String, serde_json::Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path, label: String) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: label,
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

/// Collects outputs of one stage directory and writes the manifest last.
pub struct Stage {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Stage {
    /// Writes `bytes` under the stage directory and records its digest.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.outputs.push(FileDigest {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("note values are plain data");
        self.manifest.notes.insert(key.to_string(), v);
    }

    pub fn finish(mut self) -> Result<Manifest> {
        self.manifest.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let mut text =
            serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::Numerical(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}
