//! Session service for the haptikit digital twin: configuration, the
//! sample-driven session runner, JSONL logs and replay, the WebSocket
//! endpoint, analysis and bench characterization commands.

pub mod analyze;
pub mod characterize;
pub mod config;
pub mod log;
pub mod replay;
pub mod runner;
pub mod serve;
pub mod synthetic;
pub mod wire;

use std::path::Path;

use haptikit_core::characterization::CharacterizationError;
use haptikit_core::harness::HarnessError;
use haptikit_core::stats::StatsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad config: {0}")]
    Config(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Characterization(#[from] CharacterizationError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("log write failed: {0}")]
    Log(String),
    #[error("unsupported log schema version {0}")]
    SchemaVersion(u32),
    #[error("corrupt log at line {line} ({detail}); last valid record: {last_valid}")]
    CorruptLog { line: usize, detail: String, last_valid: String },
    #[error("{0}")]
    Session(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
