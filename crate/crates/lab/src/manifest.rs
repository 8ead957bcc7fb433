//! Output directories with atomic writes and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::LabResult;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    /// The resolved plan as TOML; parses back to the same plan.
    pub config_echo: String,
    pub seed: u64,
    /// SHA-256 of `config_echo`.
    pub input_hash: String,
    pub outputs: Vec<OutputRecord>,
    pub wall_time_seconds: f64,
    pub threads: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// An output directory. Every file goes through a temporary file in the same
/// directory and is renamed into place, so readers never see partial files.
pub struct OutputDir {
    dir: PathBuf,
    records: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> LabResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), records: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn write_raw(&self, name: &str, bytes: &[u8]) -> LabResult<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.dir.join(name)).map_err(|e| e.error)?;
        Ok(())
    }

    /// Writes `name` and records its hash for the manifest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> LabResult<()> {
        self.write_raw(name, bytes)?;
        self.records.retain(|r| r.name != name);
        self.records.push(OutputRecord { name: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> LabResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn records(&self) -> &[OutputRecord] {
        &self.records
    }

    /// Writes the manifest; call after every other output.
    pub fn finish(self, manifest: &RunManifest) -> LabResult<()> {
        let mut text = serde_json::to_string_pretty(manifest).expect("serializable manifest");
        text.push('\n');
        self.write_raw(MANIFEST_FILE, text.as_bytes())
    }

    /// Writes the failure report of a run that could not complete.
    pub fn write_diagnostics(&self, value: &serde_json::Value) -> LabResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable diagnostics");
        text.push('\n');
        self.write_raw(DIAGNOSTICS_FILE, text.as_bytes())
    }
}
