use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// Provenance record written next to every command's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: serde_json::Value,
    pub dataset_fingerprint: String,
    pub tool_version: String,
    pub duration_secs: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, flags: serde_json::Value, dataset_fingerprint: String) -> Self {
        Self {
            command: command.to_string(),
            flags,
            dataset_fingerprint,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Same command, flags and data; timing and outputs aside.
    pub fn same_run(&self, other: &RunManifest) -> bool {
        self.command == other.command
            && self.flags == other.flags
            && self.dataset_fingerprint == other.dataset_fingerprint
    }

    pub fn finish(mut self, elapsed: Duration) -> Self {
        self.duration_secs = elapsed.as_secs_f64();
        self
    }
}

/// Files written by one command. Dropping the set without calling
/// [`OutputSet::commit`] deletes everything it wrote.
#[derive(Debug, Default)]
pub struct OutputSet {
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)
                .with_context(|| format!("creating directory {}", dir.display()))?;
        }
        let tmp = path.with_extension("partial");
        fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.written
            .iter()
            .map(|p| {
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect()
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}
