//! Artifact staging: every file goes to a temporary name first and is renamed
//! into place only when the whole command succeeded.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
struct Entry {
    path: String,
    bytes: usize,
    sha256: String,
}

pub struct Artifacts {
    prefix: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
    entries: Vec<Entry>,
}

impl Artifacts {
    pub fn new(prefix: &Path) -> Self {
        Self {
            prefix: prefix.to_path_buf(),
            staged: Vec::new(),
            entries: Vec::new(),
        }
    }

    /// `<prefix><suffix>`.
    pub fn path(&self, suffix: &str) -> PathBuf {
        let mut s = self.prefix.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    }

    pub fn add(&mut self, suffix: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.path(suffix);
        self.add_path(path, contents)
    }

    pub fn add_path(&mut self, path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let bytes = contents.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".partial");
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
        self.entries.push(Entry {
            path: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            bytes: bytes.len(),
            sha256: hex(&Sha256::digest(bytes)),
        });
        self.staged.push((tmp, path));
        Ok(())
    }

    /// Adds the manifest and renames everything into place.
    pub fn commit(mut self, command: &str, params: serde_json::Value) -> Result<Vec<PathBuf>, CliError> {
        let manifest = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "parameters": params,
            "artifacts": self.entries,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        self.add("_manifest.json", text)?;
        let staged = std::mem::take(&mut self.staged);
        let mut out = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
            out.push(path);
        }
        Ok(out)
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
