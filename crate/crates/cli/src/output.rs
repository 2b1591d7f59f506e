//! Run directories `<command>-<timestamp>` and their manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct RunDir {
    pub path: PathBuf,
    command: String,
    files: Vec<(String, usize, String)>,
    inputs: Vec<(PathBuf, String)>,
}

impl RunDir {
    pub fn create(parent: &Path, command: &str) -> CliResult<Self> {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        let base = parent.join(format!("{command}-{stamp}"));
        let mut path = base.clone();
        let mut k = 2;
        while path.exists() {
            path = PathBuf::from(format!("{}-{k}", base.display()));
            k += 1;
        }
        std::fs::create_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(Self {
            path,
            command: command.to_string(),
            files: Vec::new(),
            inputs: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let p = self.path.join(name);
        std::fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        self.files.push((name.to_string(), bytes.len(), sha256_hex(bytes)));
        Ok(())
    }

    /// Records an input file with its hash.
    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push((path.to_path_buf(), sha256_hex(&bytes)));
        Ok(())
    }

    pub fn finish<C: Serialize>(mut self, config: &C) -> CliResult<PathBuf> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?;
        let canonical = serde_json::to_string(&config).map_err(|e| CliError::Config(e.to_string()))?;
        let manifest = json!({
            "command": self.command,
            "created": chrono::Utc::now().to_rfc3339(),
            "version": env!("CARGO_PKG_VERSION"),
            "parallel": circrad::par::is_parallel(),
            "config": config,
            "config_sha256": sha256_hex(canonical.as_bytes()),
            "inputs": self.inputs.iter().map(|(p, h)| json!({"path": p, "sha256": h})).collect::<Vec<Value>>(),
            "files": self.files.iter().map(|(n, b, h)| json!({"name": n, "bytes": b, "sha256": h})).collect::<Vec<Value>>(),
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
        let p = self.path.join("manifest.json");
        std::fs::write(&p, text + "\n").map_err(|e| CliError::io(&p, e))?;
        self.files.clear();
        Ok(self.path)
    }
}
