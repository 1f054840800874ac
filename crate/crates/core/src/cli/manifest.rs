//! Run manifests: enough to rerun a command and check its outputs bit for bit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, verbatim.
    pub argv: Vec<String>,
    /// Directory relative paths in `argv` resolve against.
    pub cwd: PathBuf,
    pub inputs: Vec<FileRecord>,
    /// Resolved settings: β, σ, k, seeds, mode, tolerances.
    pub config: serde_json::Value,
    pub outputs: Vec<FileRecord>,
}

impl RunManifest {
    pub fn path_for(out: &Path) -> PathBuf {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Fails if any recorded input no longer has its recorded hash.
    pub fn check_inputs(&self) -> Result<()> {
        self.check(&self.inputs, "input")
    }

    /// Fails if any recorded output no longer has its recorded hash.
    pub fn check_outputs(&self) -> Result<()> {
        self.check(&self.outputs, "output")
    }

    fn check(&self, records: &[FileRecord], what: &str) -> Result<()> {
        for r in records {
            let now = FileRecord::of(&self.cwd.join(&r.path))?;
            if now.sha256 != r.sha256 {
                return Err(Error::InvalidInput(format!(
                    "{what} {} changed: recorded {}, now {}",
                    r.path.display(),
                    r.sha256,
                    now.sha256
                )));
            }
        }
        Ok(())
    }
}
