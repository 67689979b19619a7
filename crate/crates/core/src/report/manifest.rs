use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::util::write_atomic;

/// Record of one CLI run written next to its outputs.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seeds: serde_json::Value,
    pub outputs: Vec<String>,
    pub threads: usize,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seeds,
            outputs: Vec::new(),
            threads: rayon::current_num_threads(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::format(None, e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}
