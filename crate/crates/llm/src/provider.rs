//! Chat-completion providers.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::prompt::{sha256, DecodingParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub params: DecodingParams,
}

impl ChatRequest {
    /// Key identifying a request for replay.
    pub fn hash(&self) -> String {
        sha256(&format!("{}\n\0\n{}", self.system, self.user))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Part of the output tokens spent on reasoning, when reported.
    pub reasoning_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
    /// Model string reported by the provider.
    pub model: String,
    /// Whether the temperature was forwarded.
    pub temperature_sent: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("authentication failed ({status}): {body}")]
    Auth { status: u16, body: String },
    #[error("rate limited after {attempts} attempts: {body}")]
    RateLimited { attempts: u32, body: String },
    #[error("provider returned {status} after {attempts} attempts: {body}")]
    Status { status: u16, attempts: u32, body: String },
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("missing API key: environment variable {0} is not set")]
    MissingKey(String),
    #[error("no recorded response for request {0}")]
    NotRecorded(String),
    #[error("{0}")]
    Config(String),
}

pub trait ChatProvider: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

/// Price in currency units per million tokens. Reasoning tokens are billed
/// as output tokens.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pricing {
    pub input: f64,
    pub output: f64,
}

impl Pricing {
    pub fn cost(&self, u: &Usage) -> f64 {
        (u.input_tokens as f64 * self.input + u.output_tokens as f64 * self.output) / 1e6
    }
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    1000
}

fn default_timeout_s() -> u64 {
    600
}

/// One entry of `providers.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// OpenAI-compatible chat completions URL.
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    #[serde(default)]
    pub pricing: Option<Pricing>,
    #[serde(default = "yes")]
    pub supports_temperature: bool,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProvidersFile {
    #[serde(default)]
    pub providers: BTreeMap<String, ProviderConfig>,
}

impl ProvidersFile {
    pub fn parse(text: &str) -> Result<ProvidersFile, ProviderError> {
        toml::from_str(text).map_err(|e| ProviderError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ProvidersFile, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        ProvidersFile::parse(&text)
    }
}

pub struct HttpProvider {
    pub name: String,
    pub config: ProviderConfig,
    key: String,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    /// Reads the API key from the configured environment variable.
    pub fn new(name: &str, config: ProviderConfig) -> Result<HttpProvider, ProviderError> {
        let key = std::env::var(&config.api_key_env).map_err(|_| ProviderError::MissingKey(config.api_key_env.clone()))?;
        HttpProvider::with_key(name, config, key)
    }

    pub fn with_key(name: &str, config: ProviderConfig, key: String) -> Result<HttpProvider, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(HttpProvider { name: name.to_string(), config, key, client })
    }

    fn body(&self, req: &ChatRequest) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
        });
        if let (Some(t), true) = (req.params.temperature, self.config.supports_temperature) {
            body["temperature"] = json!(t);
        }
        if let Some(m) = req.params.max_tokens {
            body["max_completion_tokens"] = json!(m);
        }
        body
    }
}

/// Extract text, usage and model from an OpenAI-style completion.
pub fn parse_completion(v: &Value) -> Result<(String, Usage, String), ProviderError> {
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ProviderError::Malformed(format!("no choices[0].message.content in {v}")))?;
    let n = |p: &str| v.pointer(p).and_then(Value::as_u64).unwrap_or(0);
    let usage = Usage {
        input_tokens: n("/usage/prompt_tokens"),
        output_tokens: n("/usage/completion_tokens"),
        reasoning_tokens: n("/usage/completion_tokens_details/reasoning_tokens"),
    };
    let model = v.get("model").and_then(Value::as_str).unwrap_or_default().to_string();
    Ok((text.to_string(), usage, model))
}

impl ChatProvider for HttpProvider {
    fn id(&self) -> String {
        format!("{}:{}", self.name, self.config.model)
    }

    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let body = self.body(req);
        let attempts = self.config.max_retries + 1;
        let mut last = None;
        for attempt in 1..=attempts {
            if attempt > 1 {
                let ms = self.config.backoff_ms.saturating_mul(1 << (attempt - 2).min(6)).min(30_000);
                std::thread::sleep(Duration::from_millis(ms));
            }
            let resp = match self.client.post(&self.config.endpoint).bearer_auth(&self.key).json(&body).send() {
                Ok(r) => r,
                Err(e) => {
                    last = Some(ProviderError::Transport { attempts: attempt, message: e.to_string() });
                    continue;
                }
            };
            let status = resp.status().as_u16();
            let text = resp.text().unwrap_or_default();
            match status {
                200..=299 => {
                    let v: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(format!("{e}: {text}")))?;
                    let (text, usage, model) = parse_completion(&v)?;
                    let temperature_sent = body.get("temperature").is_some();
                    return Ok(ChatResponse { text, usage, model, temperature_sent });
                }
                401 | 403 => return Err(ProviderError::Auth { status, body: text }),
                429 => last = Some(ProviderError::RateLimited { attempts: attempt, body: text }),
                500..=599 => last = Some(ProviderError::Status { status, attempts: attempt, body: text }),
                _ => return Err(ProviderError::Status { status, attempts: attempt, body: text }),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

/// Returns the same text for every request.
pub struct MockProvider {
    pub text: String,
    pub usage: Usage,
}

impl MockProvider {
    pub fn new(text: impl Into<String>) -> MockProvider {
        MockProvider { text: text.into(), usage: Usage::default() }
    }
}

impl ChatProvider for MockProvider {
    fn id(&self) -> String {
        "mock".into()
    }

    fn complete(&self, _: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        Ok(ChatResponse { text: self.text.clone(), usage: self.usage, model: "mock".into(), temperature_sent: false })
    }
}

/// Answers requests from previously recorded responses.
#[derive(Default)]
pub struct ReplayProvider {
    responses: HashMap<String, (String, Usage, String)>,
}

impl ReplayProvider {
    pub fn insert(&mut self, request_hash: String, text: String, usage: Usage, model: String) {
        self.responses.insert(request_hash, (text, usage, model));
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatProvider for ReplayProvider {
    fn id(&self) -> String {
        "replay".into()
    }

    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let h = req.hash();
        let (text, usage, model) = self.responses.get(&h).ok_or(ProviderError::NotRecorded(h))?;
        Ok(ChatResponse { text: text.clone(), usage: *usage, model: model.clone(), temperature_sent: false })
    }
}
