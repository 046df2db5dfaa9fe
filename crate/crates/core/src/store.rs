//! Plain-file document store.
//!
//! Layout: `<root>/<collection>/<id>.json`, one pretty-printed JSON document
//! per file. Writes go to a dot-prefixed temp file in the same directory and
//! are renamed into place, so a reader sees either the previous document or
//! the new one. Temp files are never listed.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Collection {
    Events,
    Transcripts,
    MinutesItems,
    Matters,
    Index,
    Manifest,
}

impl Collection {
    pub const ALL: [Collection; 6] = [
        Collection::Events,
        Collection::Transcripts,
        Collection::MinutesItems,
        Collection::Matters,
        Collection::Index,
        Collection::Manifest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Collection::Events => "events",
            Collection::Transcripts => "transcripts",
            Collection::MinutesItems => "minutes_items",
            Collection::Matters => "matters",
            Collection::Index => "index",
            Collection::Manifest => "manifest",
        }
    }
}

impl fmt::Display for Collection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Collection {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Collection::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| StoreError::UnknownCollection(s.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown collection {0:?}")]
    UnknownCollection(String),
    #[error("{collection}/{id} not found")]
    NotFound { collection: Collection, id: String },
    #[error("invalid document id {0:?}")]
    InvalidId(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt document {path}: {source}")]
    Corrupt { path: PathBuf, source: serde_json::Error },
}

impl StoreError {
    pub fn is_not_found(&self) -> bool {
        matches!(self, StoreError::NotFound { .. })
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

type KeyLock = Arc<Mutex<()>>;

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
    locks: Arc<Mutex<HashMap<(Collection, String), KeyLock>>>,
}

impl Store {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for c in Collection::ALL {
            let dir = root.join(c.as_str());
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(Store { root, locks: Arc::default() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, collection: Collection, id: &str) -> PathBuf {
        self.root.join(collection.as_str()).join(format!("{id}.json"))
    }

    fn check_id(id: &str) -> Result<(), StoreError> {
        let bad = id.is_empty()
            || id.starts_with('.')
            || id.contains(['/', '\\', '\0'])
            || id.len() > 200;
        if bad {
            Err(StoreError::InvalidId(id.to_string()))
        } else {
            Ok(())
        }
    }

    pub fn put<T: Serialize>(&self, collection: Collection, id: &str, doc: &T) -> Result<(), StoreError> {
        self.put_bytes(collection, id, &to_document_bytes(doc))
    }

    pub fn put_bytes(&self, collection: Collection, id: &str, bytes: &[u8]) -> Result<(), StoreError> {
        self.stage(collection, id, bytes)?.commit()
    }

    /// Writes only when the stored bytes differ. Returns whether a write happened.
    pub fn put_if_changed<T: Serialize>(&self, collection: Collection, id: &str, doc: &T) -> Result<bool, StoreError> {
        let bytes = to_document_bytes(doc);
        match self.get_bytes(collection, id) {
            Ok(existing) if existing == bytes => Ok(false),
            Ok(_) => self.put_bytes(collection, id, &bytes).map(|_| true),
            Err(e) if e.is_not_found() => self.put_bytes(collection, id, &bytes).map(|_| true),
            Err(e) => Err(e),
        }
    }

    /// Writes `bytes` to a temp file next to the target without publishing it.
    /// Dropping the returned [`StagedWrite`] without committing leaves the
    /// temp file behind, exactly as a crash would.
    pub fn stage(&self, collection: Collection, id: &str, bytes: &[u8]) -> Result<StagedWrite, StoreError> {
        Self::check_id(id)?;
        let target = self.path_of(collection, id);
        let dir = target.parent().expect("document path has a parent").to_path_buf();
        let temp = dir.join(format!(
            ".{id}.{}.{}.tmp",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let mut f = fs::File::create(&temp).map_err(io_err(&temp))?;
        f.write_all(bytes).map_err(io_err(&temp))?;
        f.sync_all().map_err(io_err(&temp))?;
        Ok(StagedWrite { temp, target })
    }

    pub fn get<T: DeserializeOwned>(&self, collection: Collection, id: &str) -> Result<T, StoreError> {
        let bytes = self.get_bytes(collection, id)?;
        serde_json::from_slice(&bytes).map_err(|source| StoreError::Corrupt {
            path: self.path_of(collection, id),
            source,
        })
    }

    pub fn get_bytes(&self, collection: Collection, id: &str) -> Result<Vec<u8>, StoreError> {
        Self::check_id(id)?;
        let path = self.path_of(collection, id);
        match fs::read(&path) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                Err(StoreError::NotFound { collection, id: id.to_string() })
            }
            Err(e) => Err(StoreError::Io { path, source: e }),
        }
    }

    pub fn contains(&self, collection: Collection, id: &str) -> bool {
        Self::check_id(id).is_ok() && self.path_of(collection, id).is_file()
    }

    /// Document ids in a collection, sorted lexicographically.
    pub fn list(&self, collection: Collection) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join(collection.as_str());
        let mut ids = Vec::new();
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(ids),
            Err(e) => return Err(StoreError::Io { path: dir, source: e }),
        };
        for entry in entries {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name();
            let name = name.to_string_lossy();
            if name.starts_with('.') {
                continue;
            }
            if let Some(id) = name.strip_suffix(".json") {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn delete(&self, collection: Collection, id: &str) -> Result<(), StoreError> {
        Self::check_id(id)?;
        let path = self.path_of(collection, id);
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(StoreError::Io { path, source: e }),
        }
    }

    /// Runs `f` while holding this process's writer lock for one key.
    pub fn with_key_lock<R>(&self, collection: Collection, id: &str, f: impl FnOnce() -> R) -> R {
        let lock = {
            let mut map = self.locks.lock().unwrap_or_else(|p| p.into_inner());
            map.entry((collection, id.to_string())).or_default().clone()
        };
        let _guard = lock.lock().unwrap_or_else(|p| p.into_inner());
        f()
    }

    /// Removes temp files left by interrupted writes.
    pub fn sweep_temp_files(&self) -> Result<usize, StoreError> {
        let mut removed = 0;
        for c in Collection::ALL {
            let dir = self.root.join(c.as_str());
            for entry in fs::read_dir(&dir).map_err(io_err(&dir))?.flatten() {
                let name = entry.file_name();
                let name = name.to_string_lossy();
                if name.starts_with('.') && name.ends_with(".tmp") {
                    let p = entry.path();
                    fs::remove_file(&p).map_err(io_err(&p))?;
                    removed += 1;
                }
            }
        }
        Ok(removed)
    }
}

/// A document written to a temp file but not yet visible under its id.
#[must_use = "a staged write is invisible until committed"]
#[derive(Debug)]
pub struct StagedWrite {
    temp: PathBuf,
    target: PathBuf,
}

impl StagedWrite {
    pub fn temp_path(&self) -> &Path {
        &self.temp
    }

    pub fn commit(self) -> Result<(), StoreError> {
        fs::rename(&self.temp, &self.target).map_err(io_err(&self.target))?;
        if let Some(dir) = self.target.parent() {
            // Persist the rename itself; not all platforms allow opening a directory.
            if let Ok(d) = fs::File::open(dir) {
                let _ = d.sync_all();
            }
        }
        Ok(())
    }
}

/// Canonical on-disk bytes of a document: pretty JSON plus a trailing newline.
pub fn to_document_bytes<T: Serialize>(doc: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(doc).expect("documents serialize to JSON");
    bytes.push(b'\n');
    bytes
}
