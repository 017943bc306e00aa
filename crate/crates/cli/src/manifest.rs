//! Reproducibility sidecars. Every file the binary writes gets a
//! `<name>.manifest.json` next to it, recording the resolved configuration,
//! every seed in play, and SHA-256 digests of inputs and outputs. Re-running
//! the same subcommand with the manifest's configuration must reproduce every
//! output digest byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use killchain_core::error::Result;
use killchain_core::persist::write_json_file;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// The full configuration after defaults were applied.
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Input path, as given on the command line, to the SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new<C: Serialize>(subcommand: &str, config: &C) -> Result<RunManifest> {
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config: serde_json::to_value(config)?,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.into(), value);
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = digest_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        let digest = digest_file(path)?;
        self.outputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Where the sidecar for `out` lives: `data.csv` -> `data.csv.manifest.json`.
    pub fn path_for(out: &Path) -> PathBuf {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    }

    /// Write the sidecar next to `out` and return its path.
    pub fn write_beside(&self, out: &Path) -> Result<PathBuf> {
        let path = Self::path_for(out);
        write_json_file(self, &path)?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn digest_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}
