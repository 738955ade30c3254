//! Output directory bookkeeping and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config_sha256: String,
    config: &'a serde_json::Value,
    outputs: &'a [FileEntry],
    warnings: &'a [String],
}

/// Files written by one command, recorded for the manifest.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
    warnings: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        text.push(b'\n');
        self.write(name, &text)
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let message = message.into();
        eprintln!("warning: {message}");
        self.warnings.push(message);
    }

    /// Writes `manifest.json`. The hash covers the effective config as
    /// serialized, without the output directory.
    pub fn finish(self, command: &str, seed: u64, config: &serde_json::Value) -> Result<(), CliError> {
        let mut hashed = config.clone();
        if let Some(map) = hashed.as_object_mut() {
            map.remove("out");
        }
        let canonical = serde_json::to_vec(&hashed).map_err(|e| CliError::Numeric(e.to_string()))?;
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config_sha256: sha256_hex(&canonical),
            config,
            outputs: &self.files,
            warnings: &self.warnings,
        };
        let mut text = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Numeric(e.to_string()))?;
        text.push(b'\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}
