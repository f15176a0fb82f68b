//! Persistent translation cache.
//!
//! One directory per store, holding an append-only file of line-delimited
//! JSON records plus an in-memory index rebuilt on open. Corrupt lines are
//! skipped with a warning and treated as misses.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BackendError, Error, Result};

use super::{TranslationBackend, TranslationRequest};

const RECORD_FILE: &str = "records.jsonl";

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    model: String,
    src: String,
    tgt: String,
    params: String,
    text_hash: String,
    translation: String,
    created_at: u64,
}

/// Backend wrapper with an identical contract: hits return the stored
/// translation without touching the inner backend, misses delegate and
/// persist.
pub struct CachedBackend<B> {
    inner: B,
    index: RwLock<HashMap<String, String>>,
    writer: Mutex<File>,
    path: PathBuf,
}

impl<B: TranslationBackend> CachedBackend<B> {
    /// Opens (or creates) the store directory and rebuilds the index from
    /// the record file.
    pub fn open(inner: B, store_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(store_dir).map_err(|e| {
            Error::Config(format!(
                "cache store '{}' is not writable: {e}",
                store_dir.display()
            ))
        })?;
        let path = store_dir.join(RECORD_FILE);
        let mut index = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(record) => {
                        index.insert(record.key, record.translation);
                    }
                    Err(e) => {
                        log::warn!(
                            "skipping corrupt cache record at {}:{}: {e}",
                            path.display(),
                            lineno + 1
                        );
                    }
                }
            }
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| {
                Error::Config(format!(
                    "cache store '{}' is not writable: {e}",
                    store_dir.display()
                ))
            })?;
        Ok(Self {
            inner,
            index: RwLock::new(index),
            writer: Mutex::new(writer),
            path,
        })
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    fn persist(&self, key: &str, request: &TranslationRequest, translation: &str) {
        let record = CacheRecord {
            key: key.to_string(),
            model: request.model.clone(),
            src: request.source.code().to_string(),
            tgt: request.target.code().to_string(),
            params: request.params.canonical_string(),
            text_hash: sha256_hex(request.text.as_bytes()),
            translation: translation.to_string(),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        // A failed append only costs future hits; the translation itself
        // already succeeded.
        if let Err(e) = self.append(&record) {
            log::warn!("failed to persist cache record to {}: {e}", self.path.display());
        }
    }

    fn append(&self, record: &CacheRecord) -> Result<()> {
        let line = serde_json::to_string(record)?;
        let mut writer = self.writer.lock().unwrap();
        writeln!(writer, "{line}")?;
        writer.flush()?;
        Ok(())
    }
}

impl<B: TranslationBackend> TranslationBackend for CachedBackend<B> {
    fn translate(&self, request: &TranslationRequest) -> std::result::Result<String, BackendError> {
        let key = cache_key(request);
        if let Some(hit) = self.index.read().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let translation = self.inner.translate(request)?;
        self.persist(&key, request, &translation);
        self.index.write().unwrap().insert(key, translation.clone());
        Ok(translation)
    }
}

/// Entry count (unique keys, as the index would see them) and record-file
/// size in bytes for a store directory. A store that was never written
/// reports (0, 0).
pub fn store_stats(store_dir: &Path) -> Result<(usize, u64)> {
    let path = store_dir.join(RECORD_FILE);
    if !path.exists() {
        return Ok((0, 0));
    }
    let size = std::fs::metadata(&path)?.len();
    let reader = BufReader::new(File::open(&path)?);
    let mut keys = std::collections::BTreeSet::new();
    for line in reader.lines() {
        let line = line?;
        if let Ok(record) = serde_json::from_str::<CacheRecord>(&line) {
            keys.insert(record.key);
        }
    }
    Ok((keys.len(), size))
}

/// Drops every entry in the store.
pub fn clear_store(store_dir: &Path) -> Result<()> {
    let path = store_dir.join(RECORD_FILE);
    if path.exists() {
        std::fs::remove_file(&path)?;
    }
    Ok(())
}

/// Content-addressed key over everything that determines a translation:
/// model, language pair, text, and the full decode parameters.
pub(crate) fn cache_key(request: &TranslationRequest) -> String {
    let mut hasher = Sha256::new();
    for part in [
        request.model.as_str(),
        request.source.code(),
        request.target.code(),
        request.text.as_str(),
        &request.params.canonical_string(),
    ] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    to_hex(&hasher.finalize())
}

fn sha256_hex(bytes: &[u8]) -> String {
    to_hex(&Sha256::digest(bytes))
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
