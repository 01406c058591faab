//! Atomic output files stamped with a provenance line.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub version: &'static str,
    pub config_hash: String,
}

impl Provenance {
    /// Hashes the flag set as canonical JSON (object keys sorted).
    pub fn new(command: &str, flags: &impl Serialize) -> Self {
        let normalized = serde_json::to_value(flags).map(|v| v.to_string()).unwrap_or_default();
        let digest = Sha256::digest(format!("{command}\n{normalized}").as_bytes());
        let mut config_hash = String::with_capacity(64);
        for byte in digest.iter() {
            let _ = write!(config_hash, "{byte:02x}");
        }
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config_hash,
        }
    }

    pub fn comment_line(&self) -> String {
        format!(
            "# lppl {} version={} config={}\n",
            self.command, self.version, self.config_hash
        )
    }
}

pub struct Outputs {
    dir: PathBuf,
    provenance: Provenance,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path, provenance: Provenance) -> Self {
        Self {
            dir: dir.to_path_buf(),
            provenance,
            written: Vec::new(),
        }
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes `body` after the provenance comment.
    pub fn csv(&mut self, name: impl AsRef<Path>, body: &[u8]) -> Result<(), CliError> {
        let mut bytes = self.provenance.comment_line().into_bytes();
        bytes.extend_from_slice(body);
        self.write(name.as_ref(), &bytes)
    }

    /// Writes `{"provenance": ..., <fields of value>}`.
    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut record = json!({ "provenance": self.provenance });
        match serde_json::to_value(value).map_err(|e| CliError::analysis(e.to_string()))? {
            Value::Object(fields) => record.as_object_mut().expect("object").extend(fields),
            other => {
                record["result"] = other;
            }
        }
        let mut bytes = serde_json::to_vec_pretty(&record).map_err(|e| CliError::analysis(e.to_string()))?;
        bytes.push(b'\n');
        self.write(Path::new(name), &bytes)
    }

    fn write(&mut self, name: &Path, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let parent = path.parent().map(Path::to_path_buf).unwrap_or_else(|| self.dir.clone());
        let io = |e: std::io::Error| CliError::usage(format!("{}: {e}", path.display()));
        std::fs::create_dir_all(&parent).map_err(io)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&parent).map_err(io)?;
        tmp.write_all(bytes).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        self.written.push(path);
        Ok(())
    }
}
