//! Run manifests: who produced an output directory, from what inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Metadata written next to every result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Content hash of the dataset consumed or produced, when applicable.
    pub dataset_hash: Option<String>,
    pub threads: usize,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

pub fn now_unix_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn begin(command: &str, config_hash: String, seed: u64, threads: usize) -> Self {
        Self {
            tool_version: tool_version(),
            command: command.to_string(),
            config_hash,
            seed,
            dataset_hash: None,
            threads,
            started_unix_ms: now_unix_ms(),
            finished_unix_ms: 0,
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix_ms = now_unix_ms();
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(format!("manifest serialization: {e}"), None))?;
        std::fs::write(&path, json)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display()), None))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Runtime(format!("reading {}: {e}", path.display()), None))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("parsing {}: {e}", path.display()), None))
    }
}
