//! File formats: archive JSON, per-generation stats CSV, and run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mopso::{ArchiveMember, GenerationStats, STATS_CSV_HEADER};

/// Archive export: a JSON list of `{position, f1, f2, min_circ, feasible}`.
pub fn archive_to_json(members: &[ArchiveMember]) -> String {
    let mut s = serde_json::to_string_pretty(members).expect("archive members always serialize");
    s.push('\n');
    s
}

pub fn archive_from_json(text: &str) -> Result<Vec<ArchiveMember>> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_archive(path: &Path) -> Result<Vec<ArchiveMember>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    archive_from_json(&text)
}

pub fn stats_to_csv(stats: &[GenerationStats]) -> String {
    let mut out = String::with_capacity(64 * (stats.len() + 1));
    out.push_str(STATS_CSV_HEADER);
    out.push('\n');
    for s in stats {
        out.push_str(&s.csv_row());
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to reproduce a CLI run: the resolved configuration, the
/// seed, and a digest of every file written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub partial: bool,
    pub config: serde_json::Value,
    /// File name → SHA-256 hex digest.
    pub artifacts: BTreeMap<String, String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            partial: false,
            config,
            artifacts: BTreeMap::new(),
        }
    }
}

/// Writes output files into one directory and records their digests.
pub struct ArtifactWriter {
    dir: PathBuf,
    manifest: Manifest,
}

impl ArtifactWriter {
    pub fn create(dir: &Path, manifest: Manifest) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.artifacts.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn manifest_mut(&mut self) -> &mut Manifest {
        &mut self.manifest
    }

    pub fn finish(self) -> Result<Manifest> {
        let path = self.dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}
