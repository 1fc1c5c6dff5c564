use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::args::Command;
use crate::error::CliError;

/// Files written by one command. Unless [`commit`](Self::commit) is called,
/// everything registered here is deleted on drop, along with the output
/// directory if this run created it.
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), created_dir, files: Vec::new(), committed: false })
    }

    /// Path for artifact `name`, registered for cleanup.
    pub fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    pub fn names(&self) -> Vec<String> {
        self.files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Everything needed to re-run a command, plus timings of the original run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub invocation: Command,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub artifacts: Vec<String>,
    /// Resolved configuration of every module the command used.
    pub configs: BTreeMap<String, serde_json::Value>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = fs::read(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_slice(&raw).map_err(|e| CliError::new(crate::error::Kind::Usage, "BadManifest", format!("{}: {e}", path.display())))
    }
}
