use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Success,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: Status,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    /// One-line result of a finished stage.
    pub summary: Option<String>,
    pub error: Option<String>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: Option<u64>,
}

/// Written next to the outputs of one command as `manifest-<command>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub status: Status,
    pub stages: Vec<StageRecord>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: Option<u64>,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        Self {
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash,
            seed,
            status: Status::Running,
            stages: Vec::new(),
            started_unix_ms: now_ms(),
            finished_unix_ms: None,
        }
    }

    pub fn file_name(command: &str) -> String {
        format!("manifest-{command}.json")
    }

    pub fn outputs(&self) -> impl Iterator<Item = &str> {
        self.stages.iter().flat_map(|s| s.outputs.iter().map(String::as_str))
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(Self::file_name(&self.command));
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })
    }
}
