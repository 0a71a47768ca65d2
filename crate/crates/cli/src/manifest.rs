//! Run manifests and append-only artifact writing.
//!
//! Every run writes `manifest.json` capturing the resolved configuration,
//! the digests of all input files, and the list of emitted artifacts.
//! Artifact files are never overwritten: an existing path is an error.

use anyhow::{bail, Context, Result};
use ares_core::digest::bytes_digest;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    /// Full resolved configuration (TOML text, overrides applied).
    pub config: String,
    /// Input path -> sha256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file names relative to the output directory.
    pub outputs: Vec<String>,
}

/// Collects artifacts for one run directory and writes them append-only.
pub struct RunDir {
    root: PathBuf,
    manifest: Manifest,
}

impl RunDir {
    pub fn create(root: &Path, command: &str, seed: u64, config_text: String) -> Result<RunDir> {
        fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(RunDir {
            root: root.to_path_buf(),
            manifest: Manifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                config: config_text,
                inputs: BTreeMap::new(),
                outputs: Vec::new(),
            },
        })
    }

    /// Records an input file digest in the manifest.
    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes =
            fs::read(path).with_context(|| format!("reading input {}", path.display()))?;
        self.manifest
            .inputs
            .insert(path.display().to_string(), bytes_digest(&bytes));
        Ok(())
    }

    /// Writes a new artifact file; existing files are never touched.
    pub fn write_artifact(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        if path.exists() {
            bail!(
                "artifact {} already exists; output directories are append-only",
                path.display()
            );
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(name.to_string());
        Ok(path)
    }

    /// Finalizes the run by writing manifest.json.
    pub fn finish(mut self) -> Result<()> {
        self.manifest.outputs.sort();
        let json = serde_json::to_string_pretty(&self.manifest)?;
        let path = self.root.join("manifest.json");
        if path.exists() {
            bail!(
                "manifest {} already exists; output directories are append-only",
                path.display()
            );
        }
        fs::write(&path, json)?;
        Ok(())
    }
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}
