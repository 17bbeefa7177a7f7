//! Run manifests: config echo, timestamps, per-step status, and an inventory
//! of emitted files with content hashes. Written atomically at run end.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct StepStatus {
    pub name: String,
    pub status: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub started: String,
    pub finished: String,
    pub steps: Vec<StepStatus>,
    pub outputs: Vec<OutputEntry>,
}

pub fn hash_file(path: &Path) -> anyhow::Result<OutputEntry> {
    let data = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&data);
    Ok(OutputEntry {
        path: path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string()),
        bytes: data.len() as u64,
        sha256: format!("{:x}", hasher.finalize()),
    })
}

impl RunManifest {
    /// Atomic write: temp file in the same directory, then rename.
    pub fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let target = dir.join("manifest.json");
        let tmp = dir.join("manifest.json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        std::fs::rename(&tmp, &target)?;
        Ok(target)
    }
}
