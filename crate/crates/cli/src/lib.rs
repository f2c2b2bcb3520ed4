//! Configuration, orchestration and result files for the `remote-cnot` command.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod stages;

use std::path::PathBuf;

pub use config::{GateChoice, RunConfig};
pub use manifest::{RunManifest, StageRecord, Status};
pub use stages::{run, Command};

/// Exit statuses of the binary.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STAGE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: remote_cnot::Error,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Stage { .. } | CliError::Io { .. } => EXIT_STAGE,
        }
    }
}
