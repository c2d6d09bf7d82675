use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{ExperimentError, Result};

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seeds: BTreeMap<String, u64>,
    /// Input path → sha256.
    pub inputs: BTreeMap<String, String>,
    pub rule_version: Option<String>,
    pub rule_digest: Option<String>,
    /// Checkpoint path → sha256.
    pub checkpoints: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub audit: Option<Value>,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Hex sha256 of a file, or of every file below a directory in path order.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files: Vec<PathBuf> = walkdir::WalkDir::new(path)
            .into_iter()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_file())
            .map(|e| e.into_path())
            .collect();
        files.sort();
        for f in files {
            h.update(f.strip_prefix(path).unwrap_or(&f).to_string_lossy().as_bytes());
            h.update(fs::read(&f).map_err(io(&f))?);
        }
    } else {
        h.update(fs::read(path).map_err(io(path))?);
    }
    Ok(hex::encode(h.finalize()))
}

impl RunManifest {
    pub fn new(command: impl Into<String>, config: Value) -> Self {
        RunManifest {
            command: command.into(),
            config,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            rule_version: None,
            rule_digest: None,
            checkpoints: BTreeMap::new(),
            outputs: Vec::new(),
            audit: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn add_checkpoint(&mut self, path: &Path) -> Result<()> {
        self.checkpoints.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&tmp, json).map_err(io(&tmp))?;
        fs::rename(&tmp, path).map_err(io(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io(path))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::InvalidConfig(format!("{}: {e}", path.display())))
    }
}
