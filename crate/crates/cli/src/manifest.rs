use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub result: Value,
}

pub struct ManifestBuilder {
    command: String,
    parameters: Value,
    started: Instant,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command: &str, parameters: impl Serialize) -> Result<Self> {
        Ok(ManifestBuilder {
            command: command.to_string(),
            parameters: serde_json::to_value(parameters)?,
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    /// Writes `contents` to `path` and records it as an output.
    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    pub fn write_json(&mut self, path: &Path, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(path, &text)
    }

    pub fn finish(self, path: &Path, result: Value) -> Result<()> {
        let m = RunManifest {
            command: self.command,
            parameters: self.parameters,
            version: gsqg::VERSION.to_string(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs,
            result,
        };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
