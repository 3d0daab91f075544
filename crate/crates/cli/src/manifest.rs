use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

impl RunManifest {
    pub fn start(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            threads: rayon::current_num_threads(),
            config,
            outputs: Vec::new(),
            started_unix_ms: unix_ms(),
            finished_unix_ms: 0,
        }
    }

    pub fn finish(mut self, dir: &Path) -> anyhow::Result<()> {
        self.finished_unix_ms = unix_ms();
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }
}
