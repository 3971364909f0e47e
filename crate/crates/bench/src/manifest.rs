//! Run manifest: what was computed, from which inputs, and the SHA-256 of
//! every file written. A cell whose key and file hashes still match on
//! disk is skipped on the next run.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub id: String,
    pub task: String,
    /// Digest of everything the cell's output depends on.
    pub key: String,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_ms: u64,
    /// Output path (relative to the run directory) to SHA-256.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeedRecord {
    pub cell: String,
    pub split_seed: u64,
    pub train_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub config_digest: String,
    /// Task name to "ok", "failed" or "skipped".
    pub tasks: BTreeMap<String, String>,
    pub cells: Vec<CellRecord>,
    pub seeds: Vec<SeedRecord>,
    /// Tables and plots rebuilt from the cells.
    pub artifacts: BTreeMap<String, String>,
    /// Exclusions and degenerate cases met while building the tables.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(config_digest: String) -> Self {
        RunManifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest,
            tasks: BTreeMap::new(),
            cells: Vec::new(),
            seeds: Vec::new(),
            artifacts: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_FILE);
        match std::fs::read_to_string(&path) {
            Ok(text) => Ok(serde_json::from_str(&text).ok()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(BenchError::io(path, e)),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn cell(&self, id: &str) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.id == id)
    }

    /// Insert or replace by id, keeping cells sorted.
    pub fn record(&mut self, cell: CellRecord) {
        match self.cells.binary_search_by(|c| c.id.as_str().cmp(&cell.id)) {
            Ok(i) => self.cells[i] = cell,
            Err(i) => self.cells.insert(i, cell),
        }
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed).count()
    }
}

impl CellRecord {
    /// Whether this record can stand in for recomputing a cell with `key`.
    pub fn reusable(&self, key: &str, dir: &Path) -> bool {
        self.status == CellStatus::Ok
            && self.key == key
            && self
                .files
                .iter()
                .all(|(rel, hash)| hash_file(&dir.join(rel)).ok().as_deref() == Some(hash.as_str()))
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| BenchError::io(path, e))?;
    Ok(hash_bytes(&bytes))
}

/// Write through a temporary sibling and rename, creating parents.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| BenchError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| BenchError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| BenchError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reuse_requires_matching_key_and_contents() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(&dir.path().join("a/b.txt"), b"hello").unwrap();
        let mut files = BTreeMap::new();
        files.insert("a/b.txt".to_string(), hash_bytes(b"hello"));
        let cell = CellRecord {
            id: "x".into(),
            task: "t".into(),
            key: "k".into(),
            status: CellStatus::Ok,
            error: None,
            wall_ms: 3,
            files,
        };
        assert!(cell.reusable("k", dir.path()));
        assert!(!cell.reusable("other", dir.path()));
        std::fs::write(dir.path().join("a/b.txt"), b"changed").unwrap();
        assert!(!cell.reusable("k", dir.path()));
        let failed = CellRecord {
            status: CellStatus::Failed,
            ..cell
        };
        assert!(!failed.reusable("k", dir.path()));
    }

    #[test]
    fn record_keeps_cells_sorted_and_unique() {
        let mut m = RunManifest::new("d".into());
        for id in ["b", "a", "c", "a"] {
            m.record(CellRecord {
                id: id.into(),
                task: "t".into(),
                key: String::new(),
                status: CellStatus::Ok,
                error: None,
                wall_ms: 0,
                files: BTreeMap::new(),
            });
        }
        let ids: Vec<&str> = m.cells.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap(), Some(m));
    }
}
