//! Sentence embeddings for similarity retrieval.
//!
//! The default provider is fully deterministic and offline: it lowercases the
//! whitespace-collapsed text, extracts every character n-gram in the
//! configured range (3..=5 by default), hashes each n-gram with 64-bit
//! FNV-1a reduced modulo the dimension, accumulates counts, and
//! L2-normalizes. Identical text therefore embeds to identical vectors on
//! every platform. A remote provider can call an embeddings HTTP endpoint
//! instead.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DIMENSION: usize = 1024;
pub const DEFAULT_NGRAM_MIN: usize = 3;
pub const DEFAULT_NGRAM_MAX: usize = 5;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("transport error after {attempts} attempt(s){status}: {message}", status = .status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Transport {
        attempts: u32,
        status: Option<u16>,
        message: String,
    },
    #[error("embedding endpoint returned a malformed response: {0}")]
    Malformed(String),
    #[error("invalid embedder config: {0}")]
    Config(String),
}

/// A fixed-dimension sentence vector. Values are stored L2-normalized; the
/// cached `norm` is the pre-normalization Euclidean norm, 0.0 marking the
/// zero vector (degenerate input).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    /// Builds a vector from raw values, normalizing in place.
    pub fn from_raw(mut values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            for v in &mut values {
                *v /= norm;
            }
            EmbeddingVector { values, norm }
        } else {
            values.fill(0.0);
            EmbeddingVector { values, norm: 0.0 }
        }
    }

    pub fn zero(dimension: usize) -> Self {
        EmbeddingVector {
            values: vec![0.0; dimension],
            norm: 0.0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.norm == 0.0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Cosine similarity; defined as 0.0 when either vector is zero.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    if a.is_zero() || b.is_zero() {
        return Ok(0.0);
    }
    // Stored values are unit vectors, so the dot product is the cosine.
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    LocalNgram,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub provider: ProviderKind,
    pub dimension: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    /// Remote provider only.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Pooling hint forwarded verbatim to the remote endpoint, if set.
    pub pooling: Option<String>,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            provider: ProviderKind::LocalNgram,
            dimension: DEFAULT_DIMENSION,
            ngram_min: DEFAULT_NGRAM_MIN,
            ngram_max: DEFAULT_NGRAM_MAX,
            endpoint: None,
            model: None,
            pooling: None,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dimension == 0 {
            return Err(EmbedError::Config("dimension must be positive".into()));
        }
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return Err(EmbedError::Config(format!(
                "empty n-gram range {}..={}",
                self.ngram_min, self.ngram_max
            )));
        }
        if matches!(self.provider, ProviderKind::Remote) && self.endpoint.is_none() {
            return Err(EmbedError::Config("remote provider needs an endpoint".into()));
        }
        Ok(())
    }
}

/// The embedding entry point used by shot selection.
pub struct TextEmbedder {
    config: EmbedderConfig,
}

impl TextEmbedder {
    pub fn new(config: EmbedderConfig) -> Result<Self, EmbedError> {
        config.validate()?;
        Ok(TextEmbedder { config })
    }

    pub fn local() -> Self {
        TextEmbedder {
            config: EmbedderConfig::default(),
        }
    }

    pub fn config(&self) -> &EmbedderConfig {
        &self.config
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        match self.config.provider {
            ProviderKind::LocalNgram => Ok(embed_local(text, &self.config)),
            ProviderKind::Remote => embed_remote(text, &self.config),
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn embed_local(text: &str, config: &EmbedderConfig) -> EmbeddingVector {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.is_empty() {
        return EmbeddingVector::zero(config.dimension);
    }
    let chars: Vec<char> = collapsed.to_lowercase().chars().collect();
    let mut counts = vec![0.0f64; config.dimension];
    let mut buf = String::new();
    for n in config.ngram_min..=config.ngram_max {
        if n > chars.len() {
            break;
        }
        for window in chars.windows(n) {
            buf.clear();
            buf.extend(window.iter());
            let idx = (fnv1a64(buf.as_bytes()) % config.dimension as u64) as usize;
            counts[idx] += 1.0;
        }
    }
    EmbeddingVector::from_raw(counts)
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    model: &'a str,
    input: Vec<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pooling: Option<&'a str>,
}

#[derive(Deserialize)]
struct RemoteResponse {
    data: Vec<RemoteItem>,
}

#[derive(Deserialize)]
struct RemoteItem {
    embedding: Vec<f64>,
}

fn embed_remote(text: &str, config: &EmbedderConfig) -> Result<EmbeddingVector, EmbedError> {
    let endpoint = config
        .endpoint
        .as_deref()
        .ok_or_else(|| EmbedError::Config("remote provider needs an endpoint".into()))?;
    let body = RemoteRequest {
        model: config.model.as_deref().unwrap_or("default"),
        input: vec![text],
        pooling: config.pooling.as_deref(),
    };
    let mut request = ureq::post(endpoint);
    if let Ok(key) = std::env::var("LLM_API_KEY") {
        request = request.set("Authorization", &format!("Bearer {key}"));
    }
    let response = request
        .send_json(serde_json::to_value(&body).expect("request serializes"))
        .map_err(|e| match e {
            ureq::Error::Status(code, _) => EmbedError::Transport {
                attempts: 1,
                status: Some(code),
                message: "embedding endpoint rejected the request".to_string(),
            },
            ureq::Error::Transport(t) => EmbedError::Transport {
                attempts: 1,
                status: None,
                message: t.to_string(),
            },
        })?;
    let parsed: RemoteResponse = response
        .into_json()
        .map_err(|e| EmbedError::Malformed(e.to_string()))?;
    let first = parsed
        .data
        .into_iter()
        .next()
        .ok_or_else(|| EmbedError::Malformed("empty data array".into()))?;
    Ok(EmbeddingVector::from_raw(first.embedding))
}
