use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Write-once response store addressed by the hash of the request.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    payload_sha256: String,
    payload: Value,
}

pub fn request_key(endpoint: &str, model: &str, body: &Value) -> String {
    let mut h = Sha256::new();
    for part in [endpoint.as_bytes(), model.as_bytes(), body.to_string().as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    hex::encode(h.finalize())
}

fn payload_hash(payload: &Value) -> String {
    hex::encode(Sha256::digest(payload.to_string().as_bytes()))
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    /// Returns the stored payload, or `None` when absent or corrupt.
    pub fn get(&self, key: &str) -> Option<Value> {
        let path = self.path(key);
        let text = fs::read_to_string(&path).ok()?;
        let entry: Entry = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
                return None;
            }
        };
        if entry.key != key || entry.payload_sha256 != payload_hash(&entry.payload) {
            log::warn!("ignoring corrupt cache entry {}", path.display());
            return None;
        }
        Some(entry.payload)
    }

    /// Stores a payload unless a valid entry already exists. Concurrent
    /// writers race through an atomic rename; the first one wins.
    pub fn put(&self, key: &str, payload: &Value) -> std::io::Result<()> {
        if self.get(key).is_some() {
            return Ok(());
        }
        let path = self.path(key);
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent)?;
        let entry = Entry {
            key: key.to_string(),
            payload_sha256: payload_hash(payload),
            payload: payload.clone(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        tmp.write_all(serde_json::to_string(&entry)?.as_bytes())?;
        tmp.flush()?;
        // A corrupt file left at `path` is replaced; a valid one written
        // concurrently is identical in content.
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }
}
