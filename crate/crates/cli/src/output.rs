//! Run directories: atomic file writes and the manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA: &str = "mrqm-manifest/1";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema: &'static str,
    pub subcommand: String,
    pub config: String,
    pub out_dir: String,
    /// No run draws random numbers; identical inputs give identical files.
    pub deterministic: bool,
    pub tool_version: &'static str,
    /// SHA-256 of the config bytes followed by the effective overrides.
    pub input_sha256: String,
    pub overrides: Vec<String>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Collects the files of one run and writes them with their manifest.
pub struct RunDir {
    root: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl RunDir {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable output");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn finish(self, mut manifest: RunManifest) -> std::io::Result<()> {
        fs::create_dir_all(&self.root)?;
        for (name, bytes) in &self.files {
            write_atomic(&self.root.join(name), bytes)?;
            manifest.files.push(FileEntry {
                name: name.clone(),
                bytes: bytes.len(),
                sha256: sha256_hex(bytes),
            });
        }
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable manifest");
        bytes.push(b'\n');
        write_atomic(&self.root.join(MANIFEST_NAME), &bytes)
    }
}
