//! File-backed response cache, one JSON entry per request digest.
//!
//! Layout: `<cache_dir>/<first 2 hex of digest>/<digest>.json`.
//! Writes go to a temp file in the destination directory followed by an
//! atomic rename, so concurrent writers are safe; entries for one key are
//! identical by construction, so last-writer-wins is harmless.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{CacheKey, ChatRequest, ChatResponse, LlmError, TokenUsage};

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    request: ChatRequest,
    response: StoredResponse,
    timestamp: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoredResponse {
    text: String,
    usage: Option<TokenUsage>,
    provider_latency_ms: Option<u64>,
}

/// Entry path for a digest.
pub fn entry_path(cache_dir: &Path, key: &CacheKey) -> PathBuf {
    cache_dir.join(&key.as_str()[..2]).join(format!("{}.json", key.as_str()))
}

/// Read a cached response. A corrupted entry is treated as a miss, with a
/// warning to stderr; the caller will refetch and overwrite it.
pub fn lookup(cache_dir: &Path, key: &CacheKey) -> Option<ChatResponse> {
    let path = entry_path(cache_dir, key);
    let bytes = fs::read(&path).ok()?;
    match serde_json::from_slice::<CacheEntry>(&bytes) {
        Ok(entry) => Some(ChatResponse {
            text: entry.response.text,
            usage: entry.response.usage,
            cached: true,
            provider_latency_ms: entry.response.provider_latency_ms,
        }),
        Err(err) => {
            eprintln!(
                "insertrank: corrupted cache entry {}: {err}; treating as a miss",
                path.display()
            );
            None
        }
    }
}

/// Persist a response under the request's digest.
pub fn store(
    cache_dir: &Path,
    key: &CacheKey,
    request: &ChatRequest,
    response: &ChatResponse,
) -> Result<(), LlmError> {
    let path = entry_path(cache_dir, key);
    let parent = path.parent().expect("entry path has a parent");
    let cache_err = |source: std::io::Error| LlmError::Cache {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(parent).map_err(cache_err)?;

    let entry = CacheEntry {
        request: request.clone(),
        response: StoredResponse {
            text: response.text.clone(),
            usage: response.usage,
            provider_latency_ms: response.provider_latency_ms,
        },
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let body = serde_json::to_vec_pretty(&entry).expect("cache entry serialization");

    // Temp names must be unique per writer, not just per process:
    // concurrent threads rename independently.
    static TMP_SEQ: AtomicU64 = AtomicU64::new(0);
    let tmp = parent.join(format!(
        ".{}.tmp.{}.{}",
        key.as_str(),
        std::process::id(),
        TMP_SEQ.fetch_add(1, Ordering::Relaxed)
    ));
    fs::write(&tmp, body).map_err(cache_err)?;
    fs::rename(&tmp, &path).map_err(cache_err)
}
