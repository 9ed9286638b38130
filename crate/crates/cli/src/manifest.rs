//! Run manifests: what went in, what came out, and how long it took.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kgaug_core::sha256_hex;
use serde::Serialize;
use serde_json::Value;

use crate::error::{run_err, CliError};

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
    bytes: usize,
}

fn entry(path: &Path) -> Result<FileEntry, CliError> {
    let data = fs::read(path).map_err(|e| run_err(format!("{}: {e}", path.display())))?;
    Ok(FileEntry {
        path: path.display().to_string(),
        sha256: sha256_hex(&String::from_utf8_lossy(&data)),
        bytes: data.len(),
    })
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    command: String,
    version: &'static str,
    settings: Value,
    seeds: Value,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
    counts: Value,
    duration_ms: u128,
    #[serde(skip)]
    started: Option<Instant>,
}

impl Manifest {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION"),
            settings: Value::Null,
            seeds: Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            counts: Value::Null,
            duration_ms: 0,
            started: Some(Instant::now()),
        }
    }

    pub fn settings(&mut self, v: impl Serialize) -> &mut Self {
        self.settings = serde_json::to_value(v).expect("settings serialize");
        self
    }

    pub fn seeds(&mut self, v: impl Serialize) -> &mut Self {
        self.seeds = serde_json::to_value(v).expect("seeds serialize");
        self
    }

    pub fn counts(&mut self, v: impl Serialize) -> &mut Self {
        self.counts = serde_json::to_value(v).expect("counts serialize");
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self, CliError> {
        self.inputs.push(entry(path)?);
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> Result<&mut Self, CliError> {
        self.outputs.push(entry(path)?);
        Ok(self)
    }

    /// Writes to `explicit`, or next to `artifact` as `<artifact>.manifest.json`.
    pub fn write(&mut self, explicit: Option<&Path>, artifact: &Path) -> Result<PathBuf, CliError> {
        if let Some(t) = self.started {
            self.duration_ms = t.elapsed().as_millis();
        }
        let path = explicit.map_or_else(|| default_path(artifact), Path::to_path_buf);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| run_err(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

pub fn default_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}
