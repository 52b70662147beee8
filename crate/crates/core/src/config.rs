//! Run configuration shared by the CLI, the reasoning loop, and the eval
//! harness. One flat document; file values override defaults, flags
//! override both. Secrets never live here — endpoint credentials come
//! from the environment.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// How the knowledge gap is fed back into the graph each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    /// Identify missing knowledge as sub-questions and enrich from
    /// retrieved text (the default pipeline).
    QueryDriven,
    /// Extract triples directly from the model's answer instead.
    AnswerDriven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Mock,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Embedding,
    Llm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub max_len: usize,
    pub overlap: usize,
    pub beam_width: usize,
    pub max_depth: usize,
    /// Seed entities per query.
    pub seed_k: usize,
    pub dedup_threshold: f64,
    /// Chunks retrieved per sub-question during enrichment.
    pub enrich_k: usize,
    pub i_max: u32,
    pub feedback_mode: FeedbackMode,
    pub transport: Transport,
    pub replay_path: Option<PathBuf>,
    pub embedder: EmbedderKind,
    pub embed_dim: usize,
    pub embed_seed: u64,
    pub scorer: ScorerKind,
    pub cache_dir: Option<PathBuf>,
    /// Parallel examples in the eval harness.
    pub workers: usize,
    /// Evaluate against one shared graph instead of per-question copies.
    pub shared_graph: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_len: 512,
            overlap: 64,
            beam_width: 3,
            max_depth: 3,
            seed_k: 3,
            dedup_threshold: 0.2,
            enrich_k: 5,
            i_max: 20,
            feedback_mode: FeedbackMode::QueryDriven,
            transport: Transport::Live,
            replay_path: None,
            embedder: EmbedderKind::Mock,
            embed_dim: 32,
            embed_seed: 42,
            scorer: ScorerKind::Embedding,
            cache_dir: None,
            workers: 4,
            shared_graph: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_len == 0 {
            return Err(ConfigError::Invalid("max_len must be positive".into()));
        }
        if self.overlap >= self.max_len {
            return Err(ConfigError::Invalid(format!(
                "overlap {} must be < max_len {}",
                self.overlap, self.max_len
            )));
        }
        for (name, value) in [
            ("beam_width", self.beam_width),
            ("max_depth", self.max_depth),
            ("seed_k", self.seed_k),
            ("enrich_k", self.enrich_k),
            ("embed_dim", self.embed_dim),
            ("workers", self.workers),
        ] {
            if value == 0 {
                return Err(ConfigError::Invalid(format!("{name} must be positive")));
            }
        }
        if self.i_max == 0 {
            return Err(ConfigError::Invalid("i_max must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.dedup_threshold) {
            return Err(ConfigError::Invalid(
                "dedup_threshold must be in [0, 1]".into(),
            ));
        }
        if self.transport == Transport::Replay && self.replay_path.is_none() {
            return Err(ConfigError::Invalid(
                "replay transport requires a replay fixture path".into(),
            ));
        }
        Ok(())
    }
}
