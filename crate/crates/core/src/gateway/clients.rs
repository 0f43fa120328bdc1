//! Chat clients: an OpenAI-compatible remote client plus the offline test
//! clients (replay, oracle, empty).

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::cache::sha256_hex;
use super::{ClientError, CompletionRequest, TokenUsage};
use crate::corpus::Dataset;
use crate::prompt::render_answer_items;
use crate::task::{expand_instances, gold_target, TaskKind};

/// A synchronous chat-completion backend. `complete` returns the verbatim
/// response text; retries and caching live in the gateway, not here.
pub trait ChatClient: Send + Sync {
    /// Stable identity mixed into cache keys.
    fn name(&self) -> &str;

    fn complete(
        &self,
        request: &CompletionRequest,
    ) -> Result<(String, Option<TokenUsage>), ClientError>;
}

/// Always answers with the empty string.
pub struct EmptyClient;

impl ChatClient for EmptyClient {
    fn name(&self) -> &str {
        "empty"
    }

    fn complete(
        &self,
        _request: &CompletionRequest,
    ) -> Result<(String, Option<TokenUsage>), ClientError> {
        Ok((String::new(), None))
    }
}

/// Replays canned responses keyed by the SHA-256 of the prompt. Unmapped
/// prompts are an explicit miss, not an empty answer.
pub struct ReplayClient {
    map: HashMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ReplayLine {
    prompt_sha256: String,
    response: String,
}

impl ReplayClient {
    pub fn from_jsonl(content: &str) -> Result<Self, String> {
        let mut map = HashMap::new();
        for (line_no, raw) in content.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: ReplayLine = serde_json::from_str(raw)
                .map_err(|e| format!("replay map line {}: {e}", line_no + 1))?;
            map.insert(line.prompt_sha256, line.response);
        }
        Ok(ReplayClient { map })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        ReplayClient {
            map: pairs.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl ChatClient for ReplayClient {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete(
        &self,
        request: &CompletionRequest,
    ) -> Result<(String, Option<TokenUsage>), ClientError> {
        let hash = sha256_hex(request.prompt.as_bytes());
        match self.map.get(&hash) {
            Some(response) => Ok((response.clone(), None)),
            None => Err(ClientError::Fatal(format!(
                "replay map has no entry for prompt hash {hash}"
            ))),
        }
    }
}

/// Answers every request with the rendered gold target of the tagged
/// instance. Used to validate the pipeline end to end: a lossless pipeline
/// scores exactly 100/100/100 with this client.
pub struct OracleClient {
    answers: HashMap<(TaskKind, String), String>,
}

impl OracleClient {
    /// Precomputes gold answers for every instance of every split and every
    /// task supported by the dataset. Instances whose gold is ambiguous are
    /// skipped (they are excluded from runs as well).
    pub fn new(dataset: &Dataset) -> Self {
        let mut answers = HashMap::new();
        for example in dataset.all_examples() {
            for task in TaskKind::ALL {
                let Ok(instances) = expand_instances(example, task) else {
                    continue;
                };
                for instance in instances {
                    if let Ok(gold) = gold_target(example, &instance) {
                        let text = render_answer_items(&gold.items, task).join("\n");
                        answers.insert((task, instance.instance_id.clone()), text);
                    }
                }
            }
        }
        OracleClient { answers }
    }
}

impl ChatClient for OracleClient {
    fn name(&self) -> &str {
        "oracle"
    }

    fn complete(
        &self,
        request: &CompletionRequest,
    ) -> Result<(String, Option<TokenUsage>), ClientError> {
        self.answers
            .get(&(request.tag.task, request.tag.instance_id.clone()))
            .map(|text| (text.clone(), None))
            .ok_or_else(|| {
                ClientError::Fatal(format!(
                    "oracle has no gold answer for instance {}",
                    request.tag.instance_id
                ))
            })
    }
}

/// OpenAI-compatible chat completions over HTTP. The endpoint is the API
/// base (e.g. `https://api.openai.com/v1`); `/chat/completions` is appended
/// unless already present. The key is read from `LLM_API_KEY`.
pub struct RemoteClient {
    name: String,
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl RemoteClient {
    pub fn new(endpoint: &str) -> Self {
        let trimmed = endpoint.trim_end_matches('/');
        let url = if trimmed.ends_with("/chat/completions") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/chat/completions")
        };
        RemoteClient {
            name: format!("remote({url})"),
            url,
            api_key: std::env::var("LLM_API_KEY").ok(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(120))
                .build(),
        }
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: [WireMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl ChatClient for RemoteClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(
        &self,
        request: &CompletionRequest,
    ) -> Result<(String, Option<TokenUsage>), ClientError> {
        let body = WireRequest {
            model: &request.model,
            messages: [WireMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let mut http = self
            .agent
            .post(&self.url)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            http = http.set("Authorization", &format!("Bearer {key}"));
        }
        let response = match http.send_json(serde_json::to_value(&body).expect("serializable")) {
            Ok(r) => r,
            Err(ureq::Error::Status(status @ (401 | 403), _)) => {
                return Err(ClientError::Auth(status))
            }
            Err(ureq::Error::Status(status, r)) if status == 429 || status >= 500 => {
                let detail = r.into_string().unwrap_or_default();
                return Err(ClientError::Retryable(format!("status {status}: {detail}")));
            }
            Err(ureq::Error::Status(status, r)) => {
                let detail = r.into_string().unwrap_or_default();
                return Err(ClientError::Fatal(format!("status {status}: {detail}")));
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(ClientError::Retryable(t.to_string()))
            }
        };
        let parsed: WireResponse = response
            .into_json()
            .map_err(|e| ClientError::Malformed(e.to_string()))?;
        let first = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ClientError::Malformed("response has no choices".into()))?;
        let text = first.message.content.unwrap_or_default();
        let usage = parsed.usage.map(|u| TokenUsage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
        });
        Ok((text, usage))
    }
}
