//! Run manifests: what was run, on which inputs, producing which files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::sibling;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    /// Hex SHA-256 of the content. `None` for outputs that carry wall-clock
    /// timings and so differ between runs.
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    /// Fully resolved settings, defaults included.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn fingerprint(path: &Path) -> anyhow::Result<FileRecord> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileRecord {
        path: path.to_path_buf(),
        sha256: Some(sha256_hex(&bytes)),
    })
}

impl RunManifest {
    pub fn new(command: &str, config: impl Serialize, seed: Option<u64>) -> anyhow::Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            config: serde_json::to_value(config)?,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(fingerprint(path)?);
        Ok(())
    }

    /// Writes `bytes` to `path` and records it as a reproducible output.
    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
        write_file(path, bytes)?;
        self.outputs.push(FileRecord {
            path: path.to_path_buf(),
            sha256: Some(sha256_hex(bytes)),
        });
        Ok(())
    }

    /// Writes an output whose content varies between runs (timings).
    pub fn write_volatile(&mut self, path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
        write_file(path, bytes)?;
        self.outputs.push(FileRecord {
            path: path.to_path_buf(),
            sha256: None,
        });
        Ok(())
    }

    /// Saves the manifest as `<primary>.manifest.json`.
    pub fn save_beside(&self, primary: &Path) -> anyhow::Result<PathBuf> {
        let path = sibling(primary, "manifest.json");
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        write_file(&path, json.as_bytes())?;
        Ok(path)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(bytes)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
