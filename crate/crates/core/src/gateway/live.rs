//! Live transport speaking the OpenAI-compatible JSON-over-HTTP protocol
//! for chat completions and embeddings. Temperature is pinned to 0 and
//! transient transport failures are retried with capped backoff.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatBackend, Embedder, EmbeddingVector, GatewayError};

/// Connection settings. Secrets come from the environment, never from
/// config files or flags.
#[derive(Debug, Clone)]
pub struct LiveSettings {
    pub base_url: String,
    pub model: String,
    pub embed_model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl LiveSettings {
    /// Read `TCRQF_BASE_URL`, `TCRQF_MODEL`, `TCRQF_EMBED_MODEL`, and
    /// `TCRQF_API_KEY`. Returns None when the base URL is unset.
    pub fn from_env() -> Option<Self> {
        let base_url = std::env::var("TCRQF_BASE_URL").ok().filter(|s| !s.is_empty())?;
        Some(Self {
            base_url,
            model: std::env::var("TCRQF_MODEL").unwrap_or_else(|_| "gpt-4o-mini".into()),
            embed_model: std::env::var("TCRQF_EMBED_MODEL")
                .unwrap_or_else(|_| "text-embedding-3-small".into()),
            api_key: std::env::var("TCRQF_API_KEY").ok().filter(|s| !s.is_empty()),
            timeout: Duration::from_secs(60),
        })
    }
}

/// Bounded retry schedule for transport-level failures.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub delays: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            delays: vec![
                Duration::from_secs(1),
                Duration::from_secs(2),
                Duration::from_secs(4),
            ],
        }
    }
}

pub enum Attempt<T> {
    Ok(T),
    Transient(String),
    Fatal(GatewayError),
}

/// Run `f` up to `1 + delays.len()` times, sleeping between attempts.
/// Only transient outcomes are retried.
pub fn with_retries<T>(
    policy: &RetryPolicy,
    mut f: impl FnMut() -> Attempt<T>,
) -> Result<T, GatewayError> {
    let mut last = String::new();
    for (i, delay) in std::iter::once(None)
        .chain(policy.delays.iter().map(Some))
        .enumerate()
    {
        if let Some(d) = delay {
            std::thread::sleep(*d);
        }
        match f() {
            Attempt::Ok(v) => return Ok(v),
            Attempt::Fatal(e) => return Err(e),
            Attempt::Transient(cause) => {
                log::warn!("transient backend failure (attempt {}): {cause}", i + 1);
                last = cause;
            }
        }
    }
    Err(GatewayError::BackendUnavailable {
        attempts: policy.delays.len() as u32 + 1,
        cause: last,
    })
}

fn post_json(
    client: &reqwest::blocking::Client,
    settings: &LiveSettings,
    path: &str,
    body: &serde_json::Value,
) -> Attempt<serde_json::Value> {
    let url = format!("{}/{}", settings.base_url.trim_end_matches('/'), path);
    let mut req = client.post(&url).json(body);
    if let Some(key) = &settings.api_key {
        req = req.bearer_auth(key);
    }
    let resp = match req.send() {
        Ok(r) => r,
        Err(e) => return Attempt::Transient(format!("request error: {e}")),
    };
    let status = resp.status();
    if status.is_success() {
        match resp.json::<serde_json::Value>() {
            Ok(v) => Attempt::Ok(v),
            Err(e) => Attempt::Fatal(GatewayError::ProtocolViolation(format!(
                "invalid JSON from backend: {e}"
            ))),
        }
    } else if status.as_u16() == 429 || status.is_server_error() {
        Attempt::Transient(format!("status {status}"))
    } else {
        Attempt::Fatal(GatewayError::BackendUnavailable {
            attempts: 1,
            cause: format!("status {status}: {}", resp.text().unwrap_or_default()),
        })
    }
}

/// Chat-completion client. The prompt is sent byte-for-byte as a single
/// user message.
pub struct LiveChat {
    client: reqwest::blocking::Client,
    settings: LiveSettings,
    retry: RetryPolicy,
}

impl LiveChat {
    pub fn new(settings: LiveSettings) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| GatewayError::ProtocolViolation(format!("http client: {e}")))?;
        Ok(Self {
            client,
            settings,
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }
}

impl ChatBackend for LiveChat {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        let body = json!({
            "model": self.settings.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        });
        let value = with_retries(&self.retry, || {
            post_json(&self.client, &self.settings, "chat/completions", &body)
        })?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| {
                GatewayError::ProtocolViolation(
                    "missing choices[0].message.content in completion response".into(),
                )
            })
    }
}

/// Embedding client for the same endpoint family.
pub struct LiveEmbedder {
    client: reqwest::blocking::Client,
    settings: LiveSettings,
    retry: RetryPolicy,
    dim: std::sync::OnceLock<usize>,
}

impl LiveEmbedder {
    pub fn new(settings: LiveSettings) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| GatewayError::ProtocolViolation(format!("http client: {e}")))?;
        Ok(Self {
            client,
            settings,
            retry: RetryPolicy::default(),
            dim: std::sync::OnceLock::new(),
        })
    }
}

#[derive(Deserialize)]
struct EmbeddingData {
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingData>,
}

impl Embedder for LiveEmbedder {
    fn id(&self) -> String {
        format!("live-{}", self.settings.embed_model)
    }

    fn dim(&self) -> usize {
        *self.dim.get().unwrap_or(&0)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = json!({
            "model": self.settings.embed_model,
            "input": texts,
        });
        let value = with_retries(&self.retry, || {
            post_json(&self.client, &self.settings, "embeddings", &body)
        })?;
        let parsed: EmbeddingResponse = serde_json::from_value(value)
            .map_err(|e| GatewayError::ProtocolViolation(format!("embedding response: {e}")))?;
        if parsed.data.len() != texts.len() {
            return Err(GatewayError::ProtocolViolation(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        let mut out = Vec::with_capacity(parsed.data.len());
        for item in parsed.data {
            let v = EmbeddingVector::new(item.embedding);
            if !v.is_finite() {
                return Err(GatewayError::ProtocolViolation(
                    "non-finite embedding value".into(),
                ));
            }
            let dim = *self.dim.get_or_init(|| v.dim());
            if v.dim() != dim || v.dim() == 0 {
                return Err(GatewayError::ProtocolViolation(format!(
                    "embedding dimension mismatch: expected {dim}, got {}",
                    v.dim()
                )));
            }
            out.push(v);
        }
        Ok(out)
    }
}
