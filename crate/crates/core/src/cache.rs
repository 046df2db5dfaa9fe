//! Content-addressed cache for remote assets (captions, agendas, video).
//!
//! Bytes live at `content/<first two hex>/<sha256>`; a per-URI entry at
//! `entries/<sha256(uri)>.json` maps the source URI to its content hash.
//! A URI whose entry exists and whose stored bytes still hash correctly is
//! served without touching the network.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use url::Url;

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("request for {uri} failed with HTTP status {status}")]
    Status { uri: String, status: u16 },
    #[error("request for {uri} failed: {message}")]
    Transport { uri: String, message: String },
    #[error("unsupported URI scheme in {0}")]
    UnsupportedScheme(String),
}

impl FetchError {
    pub fn status(&self) -> Option<u16> {
        match self {
            FetchError::Status { status, .. } => Some(*status),
            _ => None,
        }
    }

    fn retryable(&self) -> bool {
        match self {
            FetchError::Status { status, .. } => *status >= 500 || *status == 429,
            FetchError::Transport { .. } => true,
            FetchError::UnsupportedScheme(_) => false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("invalid URI {0:?}")]
    InvalidUri(String),
    #[error(transparent)]
    Network(#[from] FetchError),
    #[error("cached bytes for {uri} no longer match {expected}")]
    HashMismatch { uri: String, expected: String, actual: String },
    #[error("cache i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CacheError + '_ {
    move |source| CacheError::Io { path: path.to_path_buf(), source }
}

/// Retry schedule for idempotent GETs: `attempts` tries in total, sleeping
/// `base_delay`, then twice that, and so on between them.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, base_delay: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, FetchError>) -> Result<T, FetchError> {
        let mut delay = self.base_delay;
        let mut attempt = 1;
        loop {
            match op() {
                Err(e) if e.retryable() && attempt < self.attempts.max(1) => {
                    tracing::warn!(attempt, error = %e, "fetch failed, retrying");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Source of asset bytes.
pub trait Fetch: Send + Sync {
    fn fetch(&self, uri: &Url) -> Result<Vec<u8>, FetchError>;
}

/// Fetches `http(s)` URIs over the network and `file` URIs from disk.
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
}

impl HttpFetcher {
    pub fn new(retry: RetryPolicy) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .expect("HTTP client builds with static configuration");
        HttpFetcher { client, retry }
    }

    fn get_once(&self, uri: &Url) -> Result<Vec<u8>, FetchError> {
        let transport = |e: reqwest::Error| FetchError::Transport { uri: uri.to_string(), message: e.to_string() };
        let resp = self.client.get(uri.clone()).send().map_err(transport)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(FetchError::Status { uri: uri.to_string(), status: status.as_u16() });
        }
        Ok(resp.bytes().map_err(transport)?.to_vec())
    }
}

impl Default for HttpFetcher {
    fn default() -> Self {
        HttpFetcher::new(RetryPolicy::default())
    }
}

impl Fetch for HttpFetcher {
    fn fetch(&self, uri: &Url) -> Result<Vec<u8>, FetchError> {
        match uri.scheme() {
            "http" | "https" => self.retry.run(|| self.get_once(uri)),
            "file" => {
                let path = uri.to_file_path().map_err(|_| FetchError::UnsupportedScheme(uri.to_string()))?;
                fs::read(&path).map_err(|e| FetchError::Transport { uri: uri.to_string(), message: e.to_string() })
            }
            _ => Err(FetchError::UnsupportedScheme(uri.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetCacheEntry {
    pub content_hash: String,
    pub source_uri: String,
    pub byte_length: u64,
    pub fetched_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachedAsset {
    pub content_hash: String,
    pub path: PathBuf,
}

impl CachedAsset {
    pub fn read(&self) -> Result<Vec<u8>, CacheError> {
        fs::read(&self.path).map_err(io_err(&self.path))
    }
}

/// One entry that failed [`AssetCache::audit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditFailure {
    pub entry: AssetCacheEntry,
    pub problem: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct AssetCache {
    root: PathBuf,
    fetcher: Box<dyn Fetch>,
    transfers: AtomicU64,
}

impl AssetCache {
    pub fn open(root: impl Into<PathBuf>, fetcher: Box<dyn Fetch>) -> Result<Self, CacheError> {
        let root = root.into();
        for sub in ["content", "entries"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(AssetCache { root, fetcher, transfers: AtomicU64::new(0) })
    }

    /// Number of times bytes were pulled from a source since opening.
    pub fn transfers(&self) -> u64 {
        self.transfers.load(Ordering::Relaxed)
    }

    pub fn content_path(&self, hash: &str) -> PathBuf {
        self.root.join("content").join(&hash[..2]).join(hash)
    }

    fn entry_path(&self, uri: &str) -> PathBuf {
        self.root.join("entries").join(format!("{}.json", sha256_hex(uri.as_bytes())))
    }

    pub fn entry(&self, uri: &str) -> Option<AssetCacheEntry> {
        let bytes = fs::read(self.entry_path(uri)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn fetch_asset(&self, uri: &str) -> Result<CachedAsset, CacheError> {
        let url = Url::parse(uri).map_err(|_| CacheError::InvalidUri(uri.to_string()))?;
        let uri = url.as_str();

        if let Some(entry) = self.entry(uri) {
            let path = self.content_path(&entry.content_hash);
            match fs::read(&path) {
                Ok(bytes) => {
                    let actual = sha256_hex(&bytes);
                    if actual != entry.content_hash {
                        return Err(CacheError::HashMismatch {
                            uri: uri.to_string(),
                            expected: entry.content_hash,
                            actual,
                        });
                    }
                    return Ok(CachedAsset { content_hash: entry.content_hash, path });
                }
                // Entry without content: fall through and fetch again.
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(CacheError::Io { path, source: e }),
            }
        }

        let bytes = self.fetcher.fetch(&url)?;
        self.transfers.fetch_add(1, Ordering::Relaxed);
        let hash = sha256_hex(&bytes);
        let path = self.content_path(&hash);
        if !path.is_file() {
            write_atomic(&path, &bytes)?;
        }
        let entry = AssetCacheEntry {
            content_hash: hash.clone(),
            source_uri: uri.to_string(),
            byte_length: bytes.len() as u64,
            fetched_at: Utc::now(),
        };
        let entry_bytes = serde_json::to_vec_pretty(&entry).expect("cache entries serialize");
        write_atomic(&self.entry_path(uri), &entry_bytes)?;
        Ok(CachedAsset { content_hash: hash, path })
    }

    pub fn entries(&self) -> Result<Vec<AssetCacheEntry>, CacheError> {
        let dir = self.root.join("entries");
        let mut out = Vec::new();
        for e in fs::read_dir(&dir).map_err(io_err(&dir))?.flatten() {
            let name = e.file_name();
            if name.to_string_lossy().starts_with('.') {
                continue;
            }
            let bytes = fs::read(e.path()).map_err(io_err(&e.path()))?;
            if let Ok(entry) = serde_json::from_slice(&bytes) {
                out.push(entry);
            }
        }
        out.sort_by(|a: &AssetCacheEntry, b| a.source_uri.cmp(&b.source_uri));
        Ok(out)
    }

    /// Re-hashes every cached asset and reports entries whose bytes are
    /// missing, have the wrong length, or no longer hash to their key.
    pub fn audit(&self) -> Result<Vec<AuditFailure>, CacheError> {
        let mut failures = Vec::new();
        for entry in self.entries()? {
            let path = self.content_path(&entry.content_hash);
            let problem = match fs::File::open(&path) {
                Err(e) => Some(format!("cannot open content: {e}")),
                Ok(mut f) => {
                    let mut hasher = Sha256::new();
                    let mut buf = [0u8; 64 * 1024];
                    let mut len = 0u64;
                    loop {
                        let n = f.read(&mut buf).map_err(io_err(&path))?;
                        if n == 0 {
                            break;
                        }
                        len += n as u64;
                        hasher.update(&buf[..n]);
                    }
                    let actual = hex::encode(hasher.finalize());
                    if actual != entry.content_hash {
                        Some(format!("content hashes to {actual}"))
                    } else if len != entry.byte_length {
                        Some(format!("content is {len} bytes, entry says {}", entry.byte_length))
                    } else {
                        None
                    }
                }
            };
            if let Some(problem) = problem {
                failures.push(AuditFailure { entry, problem });
            }
        }
        Ok(failures)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CacheError> {
    let dir = path.parent().expect("cache paths have a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
    let temp = dir.join(format!(
        ".{name}.{}.{}.tmp",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let mut f = fs::File::create(&temp).map_err(io_err(&temp))?;
    f.write_all(bytes).map_err(io_err(&temp))?;
    f.sync_all().map_err(io_err(&temp))?;
    fs::rename(&temp, path).map_err(io_err(path))
}


#[cfg(test)]
mod tests {
    use super::test_server::serve;
    use super::*;
    use std::collections::HashMap;
    use std::sync::atomic::Ordering as AtomicOrdering;

    fn quick() -> Box<dyn Fetch> {
        Box::new(HttpFetcher::new(RetryPolicy { attempts: 3, base_delay: Duration::from_millis(1) }))
    }

    #[test]
    fn abc_digest() {
        // Reference value from Python's hashlib.sha256(b"abc").
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn second_fetch_is_a_cache_hit() {
        let server = serve(HashMap::from([("/a.vtt".to_string(), (200, b"abc".to_vec()))]));
        let dir = tempfile::tempdir().unwrap();
        let cache = AssetCache::open(dir.path(), quick()).unwrap();
        let uri = format!("{}/a.vtt", server.base);
        let first = cache.fetch_asset(&uri).unwrap();
        assert_eq!(first.content_hash, sha256_hex(b"abc"));
        assert_eq!(first.read().unwrap(), b"abc");
        let second = cache.fetch_asset(&uri).unwrap();
        assert_eq!(first, second);
        assert_eq!(cache.transfers(), 1);
        assert_eq!(server.hits.load(AtomicOrdering::SeqCst), 1);
        assert!(cache.audit().unwrap().is_empty());
    }

    #[test]
    fn not_found_is_network_error() {
        let server = serve(HashMap::new());
        let dir = tempfile::tempdir().unwrap();
        let cache = AssetCache::open(dir.path(), quick()).unwrap();
        let err = cache.fetch_asset(&format!("{}/missing", server.base)).unwrap_err();
        match err {
            CacheError::Network(e) => assert_eq!(e.status(), Some(404)),
            other => panic!("unexpected {other:?}"),
        }
        // 4xx is not retried.
        assert_eq!(server.hits.load(AtomicOrdering::SeqCst), 1);
    }

    #[test]
    fn server_errors_are_retried() {
        let server = serve(HashMap::from([("/flaky".to_string(), (503, Vec::new()))]));
        let dir = tempfile::tempdir().unwrap();
        let cache = AssetCache::open(dir.path(), quick()).unwrap();
        let err = cache.fetch_asset(&format!("{}/flaky", server.base)).unwrap_err();
        assert!(matches!(err, CacheError::Network(ref e) if e.status() == Some(503)));
        assert_eq!(server.hits.load(AtomicOrdering::SeqCst), 3);
    }

    #[test]
    fn tampered_content_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.txt");
        fs::write(&src, b"original").unwrap();
        let cache = AssetCache::open(dir.path().join("cache"), quick()).unwrap();
        let uri = Url::from_file_path(&src).unwrap().to_string();
        let asset = cache.fetch_asset(&uri).unwrap();
        fs::write(&asset.path, b"tampered").unwrap();
        assert!(matches!(cache.fetch_asset(&uri), Err(CacheError::HashMismatch { .. })));
        let failures = cache.audit().unwrap();
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].entry.source_uri, uri);
    }

    #[test]
    fn missing_content_is_refetched() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.txt");
        fs::write(&src, b"bytes").unwrap();
        let cache = AssetCache::open(dir.path().join("cache"), quick()).unwrap();
        let uri = Url::from_file_path(&src).unwrap().to_string();
        let asset = cache.fetch_asset(&uri).unwrap();
        fs::remove_file(&asset.path).unwrap();
        cache.fetch_asset(&uri).unwrap();
        assert_eq!(cache.transfers(), 2);
    }

    #[test]
    fn unsupported_scheme() {
        let dir = tempfile::tempdir().unwrap();
        let cache = AssetCache::open(dir.path(), quick()).unwrap();
        assert!(matches!(
            cache.fetch_asset("ftp://example.org/x"),
            Err(CacheError::Network(FetchError::UnsupportedScheme(_)))
        ));
        assert!(matches!(cache.fetch_asset("not a uri"), Err(CacheError::InvalidUri(_))));
    }
}
