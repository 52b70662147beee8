//! Replay transport: responses recorded against the content hash of the
//! full rendered prompt, making whole pipeline runs bit-reproducible.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatBackend, ChatExchange, GatewayError};

/// Hex SHA-256 of the prompt bytes; the replay fixture key.
pub fn prompt_hash(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureLine {
    hash: String,
    response: String,
}

/// Deterministic transport serving recorded responses.
#[derive(Debug, Default)]
pub struct ReplayChat {
    responses: BTreeMap<String, String>,
}

impl ReplayChat {
    pub fn new(responses: BTreeMap<String, String>) -> Self {
        Self { responses }
    }

    /// Load a JSON Lines fixture of `{"hash", "response"}` records.
    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, GatewayError> {
        let mut responses = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| {
                GatewayError::ProtocolViolation(format!("replay fixture read error: {e}"))
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: FixtureLine = serde_json::from_str(&line).map_err(|e| {
                GatewayError::ProtocolViolation(format!("replay fixture line {}: {e}", i + 1))
            })?;
            responses.insert(parsed.hash, parsed.response);
        }
        Ok(Self { responses })
    }

    pub fn from_jsonl_path(path: &std::path::Path) -> Result<Self, GatewayError> {
        let file = std::fs::File::open(path).map_err(|e| {
            GatewayError::ProtocolViolation(format!("cannot open replay fixture {path:?}: {e}"))
        })?;
        Self::from_jsonl(std::io::BufReader::new(file))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatBackend for ReplayChat {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        let hash = prompt_hash(prompt);
        self.responses
            .get(&hash)
            .cloned()
            .ok_or(GatewayError::ReplayMiss { hash })
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Wraps any backend and records every exchange, both for request
/// logging and for writing replay fixtures.
pub struct RecordingChat<C> {
    inner: C,
    model_id: String,
    log: Mutex<Vec<ChatExchange>>,
}

impl<C: ChatBackend> RecordingChat<C> {
    pub fn new(inner: C, model_id: impl Into<String>) -> Self {
        Self {
            inner,
            model_id: model_id.into(),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn exchanges(&self) -> Vec<ChatExchange> {
        self.log.lock().unwrap().clone()
    }

    /// Serialize the recorded exchanges as a replay fixture. Fails if two
    /// exchanges share a prompt hash but disagree on the response, since
    /// such a log cannot be replayed.
    pub fn to_replay_jsonl(&self) -> Result<String, GatewayError> {
        let log = self.log.lock().unwrap();
        let mut seen: BTreeMap<String, &str> = BTreeMap::new();
        for ex in log.iter() {
            let hash = prompt_hash(&ex.request_text);
            if let Some(prev) = seen.get(&hash) {
                if *prev != ex.response_text {
                    return Err(GatewayError::ProtocolViolation(format!(
                        "conflicting responses recorded for prompt hash {hash}"
                    )));
                }
            } else {
                seen.insert(hash, &ex.response_text);
            }
        }
        let mut out = String::new();
        for (hash, response) in seen {
            let line = serde_json::to_string(&FixtureLine {
                hash,
                response: response.to_string(),
            })
            .expect("fixture line serializes");
            out.push_str(&line);
            out.push('\n');
        }
        Ok(out)
    }
}

impl<C: ChatBackend> ChatBackend for RecordingChat<C> {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        let started = Instant::now();
        let response = self.inner.complete(prompt)?;
        self.log.lock().unwrap().push(ChatExchange {
            request_text: prompt.to_string(),
            response_text: response.clone(),
            model_id: self.model_id.clone(),
            latency: started.elapsed(),
        });
        Ok(response)
    }

    fn deterministic(&self) -> bool {
        self.inner.deterministic()
    }
}
