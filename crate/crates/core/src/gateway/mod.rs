//! All interaction with chat-completion and embedding backends: prompt
//! templates, transports (live HTTP, recorded replay, scripted rules),
//! and the deterministic mock embedder used by offline tests.

mod live;
mod mock;
mod replay;
mod scripted;
mod templates;

pub use live::{LiveChat, LiveEmbedder, LiveSettings, RetryPolicy};
pub use mock::MockEmbedder;
pub use replay::{prompt_hash, RecordingChat, ReplayChat};
pub use scripted::{ScriptedChat, ScriptedRule};
pub use templates::{render, PromptTemplate, TemplateName, TemplateSet};

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from template rendering and backend transport.
#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("missing binding for placeholder {{{0}}}")]
    MissingBinding(String),
    #[error("backend unavailable after {attempts} attempt(s): {cause}")]
    BackendUnavailable { attempts: u32, cause: String },
    #[error("no recorded response for prompt hash {hash}")]
    ReplayMiss { hash: String },
    #[error("backend protocol violation: {0}")]
    ProtocolViolation(String),
}

/// A fixed-dimension embedding. Values are finite; backends that return
/// anything else are rejected at the transport boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// One request/response pair, recorded verbatim for replay and for
/// verifying that transports do not alter prompt bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatExchange {
    pub request_text: String,
    pub response_text: String,
    pub model_id: String,
    pub latency: Duration,
}

/// A chat-completion backend. Implementations must be shareable across
/// threads; the reasoning loop and the eval harness both rely on that.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError>;

    /// True when identical prompts always produce identical responses
    /// (replay and scripted transports). The loop skips its parse-failure
    /// retry for deterministic backends.
    fn deterministic(&self) -> bool {
        false
    }
}

/// A text-embedding backend. One backend produces one fixed dimension.
pub trait Embedder: Send + Sync {
    /// Stable identifier, used as the embedding-cache key prefix.
    fn id(&self) -> String;

    fn dim(&self) -> usize;

    /// One vector per input, order-preserving. Inputs must be non-empty.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        Ok(self.embed(std::slice::from_ref(&text.to_string()))?.remove(0))
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        (**self).complete(prompt)
    }

    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        (**self).complete(prompt)
    }

    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }
}

impl<T: Embedder + ?Sized> Embedder for &T {
    fn id(&self) -> String {
        (**self).id()
    }

    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        (**self).embed(texts)
    }
}
