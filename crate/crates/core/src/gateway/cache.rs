//! Content-addressed response cache.
//!
//! Keys are the SHA-256 of (client identity, model, temperature bits, max
//! tokens, prompt bytes), each field length-prefixed so field boundaries
//! cannot be confused. Entries live at `<cache>/<first2 hex>/<key>.json` and
//! are written atomically (temp file + rename), so readers never observe a
//! partial value.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompletionRequest, GatewayError, TokenUsage};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Cache key for a request under a given client identity.
pub fn cache_key(client: &str, request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    let mut field = |bytes: &[u8]| {
        hasher.update((bytes.len() as u64).to_be_bytes());
        hasher.update(bytes);
    };
    field(client.as_bytes());
    field(request.model.as_bytes());
    field(&request.temperature.to_bits().to_be_bytes());
    field(&request.max_tokens.to_be_bytes());
    field(request.prompt.as_bytes());
    hex(&hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub response: String,
    pub client: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub prompt_sha256: String,
    pub latency_ms: u64,
    pub usage: Option<TokenUsage>,
    pub created_unix: u64,
}

#[derive(Debug)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        Ok(ResponseCache { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, GatewayError> {
        let path = self.path_for(key);
        match fs::read_to_string(&path) {
            Ok(raw) => serde_json::from_str(&raw)
                .map(Some)
                .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put(&self, key: &str, entry: &CacheEntry) -> Result<(), GatewayError> {
        let path = self.path_for(key);
        let dir = path.parent().expect("cache paths have a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{key}.tmp-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.subsec_nanos())
                .unwrap_or(0)
        ));
        let body = serde_json::to_string_pretty(entry)
            .map_err(|e| GatewayError::Cache(e.to_string()))?;
        fs::write(&tmp, body)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Iterates every cached entry (order unspecified).
    pub fn entries(&self) -> Result<Vec<CacheEntry>, GatewayError> {
        let mut out = Vec::new();
        for shard in fs::read_dir(&self.root)? {
            let shard = shard?.path();
            if !shard.is_dir() {
                continue;
            }
            for file in fs::read_dir(&shard)? {
                let file = file?.path();
                if file.extension().and_then(|e| e.to_str()) == Some("json") {
                    let raw = fs::read_to_string(&file)?;
                    let entry = serde_json::from_str(&raw)
                        .map_err(|e| GatewayError::Cache(format!("{}: {e}", file.display())))?;
                    out.push(entry);
                }
            }
        }
        Ok(out)
    }
}

/// Writes a replay map (`{"prompt_sha256", "response"}` JSONL, sorted by
/// hash) from everything currently in the cache.
pub fn export_replay_map(cache: &ResponseCache, out: impl AsRef<Path>) -> Result<(), GatewayError> {
    #[derive(Serialize)]
    struct Line<'a> {
        prompt_sha256: &'a str,
        response: &'a str,
    }
    let mut entries = cache.entries()?;
    entries.sort_by(|a, b| a.prompt_sha256.cmp(&b.prompt_sha256));
    entries.dedup_by(|a, b| a.prompt_sha256 == b.prompt_sha256);
    let mut body = String::new();
    for entry in &entries {
        body.push_str(
            &serde_json::to_string(&Line {
                prompt_sha256: &entry.prompt_sha256,
                response: &entry.response,
            })
            .map_err(|e| GatewayError::Cache(e.to_string()))?,
        );
        body.push('\n');
    }
    fs::write(out, body)?;
    Ok(())
}
