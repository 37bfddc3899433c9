//! Atomic artifact writes and the per-stage manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_sha256: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

/// Collects the inputs and outputs of one stage run.
pub struct StageWriter {
    out: PathBuf,
    stage: &'static str,
    record: StageRecord,
}

impl StageWriter {
    pub fn new(out: &Path, stage: &'static str, config_sha256: String, seed: u64) -> Self {
        Self {
            out: out.to_path_buf(),
            stage,
            record: StageRecord {
                config_sha256,
                seed,
                ..StageRecord::default()
            },
        }
    }

    /// Key of a file in the manifest: its path below the output directory,
    /// or its file name when it lives elsewhere.
    fn key(&self, path: &Path) -> String {
        match path.strip_prefix(&self.out) {
            Ok(rel) => rel.to_string_lossy().replace('\\', "/"),
            Err(_) => path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let key = self.key(path);
        self.record.inputs.insert(key, sha256_hex(&bytes));
        Ok(bytes)
    }

    /// Writes an artifact below the output directory and records its digest.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out.join(rel);
        write_atomic(&path, bytes)?;
        self.record.outputs.insert(rel.to_string(), sha256_hex(bytes));
        log::info!("{}: wrote {}", self.stage, path.display());
        Ok(path)
    }

    /// Serializes with a CSV-producing closure, then writes atomically.
    pub fn write_with(
        &mut self,
        rel: &str,
        f: impl FnOnce(&mut Vec<u8>) -> polispace_core::Result<()>,
    ) -> Result<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf).with_context(|| format!("serializing {rel}"))?;
        self.write(rel, &buf)
    }

    /// Merges this stage's record into the output directory's manifest.
    pub fn finish(self) -> Result<()> {
        let path = self.out.join(MANIFEST);
        let mut manifest: Manifest = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .with_context(|| format!("parsing {}", path.display()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
        };
        manifest.stages.insert(self.stage.to_string(), self.record);
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)
    }
}
