//! Run manifests: a JSON sidecar written next to every output, capturing the
//! exact configuration so a rerun reproduces the results byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;

use crate::ioutil::atomic_write;

/// Version stamp for every file format the tool emits.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub subcommand: String,
    pub version: String,
    /// Resolved configuration (flags merged over config file and defaults).
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Seconds per pipeline stage.
    pub timings: BTreeMap<String, f64>,
    /// Human-readable notes about skipped or degraded work.
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value) -> Self {
        RunManifest {
            format_version: FORMAT_VERSION,
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings
            .insert(stage.to_string(), t.elapsed().as_secs_f64());
        out
    }

    /// Write the manifest next to `anchor` as `<anchor>.manifest.json`.
    pub fn write(&self, anchor: &Path) -> Result<PathBuf> {
        let path = manifest_path(anchor);
        atomic_write(&path, &format!("{}\n", serde_json::to_string_pretty(self)?))?;
        Ok(path)
    }
}

pub fn manifest_path(anchor: &Path) -> PathBuf {
    let mut name = anchor.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    anchor.with_file_name(name)
}
