//! Per-run manifest with content hashes of inputs and outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub tool_version: String,
    /// Input file → sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output file (relative to `output_dir`) → sha256. Deterministic for a
    /// fixed config and seed.
    pub artifacts: BTreeMap<String, String>,
    /// Outputs carrying wall-clock timings, left unhashed.
    pub volatile: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Self {
        Self {
            command: command.to_string(),
            config: config.map(Path::to_path_buf),
            seed,
            output_dir: out.to_path_buf(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            volatile: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let h = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), h);
        Ok(())
    }

    pub fn artifact(&mut self, name: &str) -> Result<()> {
        let h = sha256_file(&self.output_dir.join(name))?;
        self.artifacts.insert(name.to_string(), h);
        Ok(())
    }

    pub fn volatile(&mut self, name: &str) {
        self.volatile.push(name.to_string());
    }

    pub fn write(&self) -> Result<PathBuf> {
        let p = self.output_dir.join(MANIFEST_FILE);
        std::fs::write(&p, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    /// Names of inputs and artifacts whose current hash differs from the
    /// recorded one.
    pub fn stale(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for (p, h) in &self.inputs {
            if sha256_file(Path::new(p)).ok().as_ref() != Some(h) {
                out.push(p.clone());
            }
        }
        for (name, h) in &self.artifacts {
            if sha256_file(&self.output_dir.join(name)).ok().as_ref() != Some(h) {
                out.push(name.clone());
            }
        }
        Ok(out)
    }
}
