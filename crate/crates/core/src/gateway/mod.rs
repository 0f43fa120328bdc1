//! Uniform chat-completion interface with persistent response caching.
//!
//! Every request is looked up in a content-addressed on-disk cache first; on
//! a miss the configured client is called with retry/backoff and the verbatim
//! response is persisted before being returned. Offline clients (replay,
//! oracle, empty) make the whole pipeline runnable without network access.

mod cache;
mod clients;

pub use cache::{cache_key, export_replay_map, sha256_hex, CacheEntry, ResponseCache};
pub use clients::{ChatClient, EmptyClient, OracleClient, RemoteClient, ReplayClient};

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::TaskKind;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("temperature {0} is negative")]
    BadTemperature(f64),
    #[error("authentication failed (status {status}); check LLM_API_KEY")]
    Auth { status: u16 },
    #[error("request failed after {attempts} attempt(s): {message}")]
    Exhausted { attempts: u32, message: String },
    #[error("endpoint returned a malformed response: {0}")]
    Malformed(String),
    #[error("replay map has no entry for prompt hash {0}")]
    ReplayMiss(String),
    #[error("oracle has no gold answer for instance {0}")]
    OracleMiss(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Identifies which test instance and ensemble group a request serves; used
/// by the oracle client and for audit records, never sent over the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestTag {
    pub instance_id: String,
    pub task: TaskKind,
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub model: String,
    /// Sent as a single user message.
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub tag: RequestTag,
}

pub const DEFAULT_MAX_TOKENS: u32 = 256;
pub const DEFAULT_TEMPERATURE: f64 = 0.0;

impl CompletionRequest {
    pub fn new(model: impl Into<String>, prompt: impl Into<String>, tag: RequestTag) -> Self {
        CompletionRequest {
            model: model.into(),
            prompt: prompt.into(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
            tag,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    /// Verbatim response text, empty string included.
    pub text: String,
    pub latency_ms: u64,
    pub usage: Option<TokenUsage>,
    pub cache_hit: bool,
    pub client: String,
}

/// Exponential backoff: `base * factor^(attempt-1)` between attempts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base: Duration::from_secs(1),
            factor: 2.0,
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let factor = self.factor.powi(attempt.saturating_sub(1) as i32);
        self.base.mul_f64(factor)
    }
}

/// Outcome of a single client call, distinguishing retryable failures.
pub enum ClientError {
    Retryable(String),
    Auth(u16),
    Malformed(String),
    Fatal(String),
}

pub struct Gateway {
    client: Box<dyn ChatClient>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    calls: AtomicU64,
}

impl Gateway {
    pub fn new(client: Box<dyn ChatClient>, cache: Option<ResponseCache>) -> Self {
        Gateway {
            client,
            cache,
            retry: RetryPolicy::default(),
            calls: AtomicU64::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn client_name(&self) -> &str {
        self.client.name()
    }

    /// Number of underlying client invocations so far (cache hits excluded).
    pub fn client_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        if request.prompt.is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        if request.temperature < 0.0 {
            return Err(GatewayError::BadTemperature(request.temperature));
        }
        let key = cache_key(self.client.name(), request);
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(&key)? {
                return Ok(CompletionResult {
                    text: entry.response,
                    latency_ms: entry.latency_ms,
                    usage: entry.usage,
                    cache_hit: true,
                    client: entry.client,
                });
            }
        }

        let mut attempt = 0u32;
        let (text, usage, latency_ms) = loop {
            attempt += 1;
            self.calls.fetch_add(1, Ordering::Relaxed);
            let started = Instant::now();
            match self.client.complete(request) {
                Ok((text, usage)) => {
                    break (text, usage, started.elapsed().as_millis() as u64)
                }
                Err(ClientError::Auth(status)) => return Err(GatewayError::Auth { status }),
                Err(ClientError::Malformed(m)) => return Err(GatewayError::Malformed(m)),
                Err(ClientError::Fatal(m)) => {
                    return Err(GatewayError::Exhausted {
                        attempts: attempt,
                        message: m,
                    })
                }
                Err(ClientError::Retryable(m)) => {
                    if attempt >= self.retry.max_attempts {
                        return Err(GatewayError::Exhausted {
                            attempts: attempt,
                            message: m,
                        });
                    }
                    std::thread::sleep(self.retry.delay(attempt));
                }
            }
        };

        if let Some(cache) = &self.cache {
            cache.put(
                &key,
                &CacheEntry {
                    response: text.clone(),
                    client: self.client.name().to_string(),
                    model: request.model.clone(),
                    temperature: request.temperature,
                    max_tokens: request.max_tokens,
                    prompt_sha256: cache::sha256_hex(request.prompt.as_bytes()),
                    latency_ms,
                    usage,
                    created_unix: std::time::SystemTime::now()
                        .duration_since(std::time::UNIX_EPOCH)
                        .map(|d| d.as_secs())
                        .unwrap_or(0),
                },
            )?;
        }

        Ok(CompletionResult {
            text,
            latency_ms,
            usage,
            cache_hit: false,
            client: self.client.name().to_string(),
        })
    }
}
