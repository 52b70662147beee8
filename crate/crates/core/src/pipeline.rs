//! Wiring: construct backends from a [`RunConfig`], build the initial
//! graph from a corpus, and drive the reasoning loop for a question.

use std::path::PathBuf;

use thiserror::Error;

use crate::config::{EmbedderKind, RunConfig, ScorerKind, Transport};
use crate::corpus::{Corpus, CorpusError};
use crate::embed_cache::{CacheError, EmbeddingCache};
use crate::extraction::{parse_and_validate, ValidationMode};
use crate::gateway::{
    render, ChatBackend, Embedder, GatewayError, LiveChat, LiveEmbedder, LiveSettings,
    MockEmbedder, ReplayChat, TemplateSet,
};
use crate::graph::{GraphError, KnowledgeGraph};
use crate::reasoning::{run_query, LoopContext, RunFailure, RunOutcome};
use crate::retrieval::{DenseIndex, EmbeddingScorer, LlmScorer, RetrievalError, SubgraphScorer};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("all {0} extraction call(s) failed; backend unavailable")]
    TotalGatewayFailure(usize),
    #[error("live transport requires TCRQF_BASE_URL in the environment")]
    MissingCredentials,
}

/// Summary of one `build_graph` run.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct BuildReport {
    pub chunks: usize,
    pub entities: usize,
    pub relations: usize,
    pub parse_errors: usize,
    pub skipped_lines: usize,
    pub failed_chunks: usize,
}

/// A configured engine: chat backend, embedder, templates, and config.
pub struct Engine {
    chat: Box<dyn ChatBackend>,
    embedder: Box<dyn Embedder>,
    templates: TemplateSet,
    config: RunConfig,
}

impl Engine {
    /// Wire transports according to the config: replay fixtures or the
    /// OpenAI-compatible endpoint from the environment, mock or live
    /// embedder.
    pub fn from_config(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let chat: Box<dyn ChatBackend> = match config.transport {
            Transport::Replay => {
                let path = config.replay_path.as_ref().expect("validated");
                Box::new(ReplayChat::from_jsonl_path(path)?)
            }
            Transport::Live => {
                let settings =
                    LiveSettings::from_env().ok_or(PipelineError::MissingCredentials)?;
                Box::new(LiveChat::new(settings)?)
            }
        };
        let embedder: Box<dyn Embedder> = match config.embedder {
            EmbedderKind::Mock => Box::new(MockEmbedder::new(config.embed_seed, config.embed_dim)),
            EmbedderKind::Live => {
                let settings =
                    LiveSettings::from_env().ok_or(PipelineError::MissingCredentials)?;
                Box::new(LiveEmbedder::new(settings)?)
            }
        };
        Ok(Self {
            chat,
            embedder,
            templates: TemplateSet::builtin(),
            config,
        })
    }

    /// Engine over explicit backends; used by tests and the fixture
    /// generator.
    pub fn with_backends(
        chat: Box<dyn ChatBackend>,
        embedder: Box<dyn Embedder>,
        config: RunConfig,
    ) -> Self {
        Self {
            chat,
            embedder,
            templates: TemplateSet::builtin(),
            config,
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn chat(&self) -> &dyn ChatBackend {
        &*self.chat
    }

    pub fn embedder(&self) -> &dyn Embedder {
        &*self.embedder
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    /// Build the round-0 graph: every chunk goes through the extraction
    /// prompt and merges into one store. Individual chunk failures are
    /// tolerated unless every call fails.
    pub fn build_graph(&self, corpus: &Corpus) -> Result<(KnowledgeGraph, BuildReport), PipelineError> {
        let mut graph = KnowledgeGraph::new();
        let mut report = BuildReport {
            chunks: corpus.chunks().len(),
            ..Default::default()
        };
        for chunk in corpus.chunks() {
            let prompt = render(
                &self.templates.triples_extraction,
                &[("input_text".to_string(), chunk.text.clone())]
                    .into_iter()
                    .collect(),
            )?;
            let response = match self.chat.complete(&prompt) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("extraction for chunk {} failed: {e}", chunk.chunk_id);
                    report.failed_chunks += 1;
                    continue;
                }
            };
            let (batch, errors, skipped) =
                parse_and_validate(&response, &chunk.chunk_id, ValidationMode::Lenient);
            report.parse_errors += errors.len();
            report.skipped_lines += skipped;
            graph.merge_extraction(&batch, self.config.dedup_threshold)?;
        }
        if report.chunks > 0 && report.failed_chunks == report.chunks {
            return Err(PipelineError::TotalGatewayFailure(report.chunks));
        }
        report.entities = graph.node_count();
        report.relations = graph.edge_count();
        Ok((graph, report))
    }

    fn cache_path(&self) -> Option<PathBuf> {
        let dir = self.config.cache_dir.as_ref()?;
        let id: String = self
            .embedder
            .id()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect();
        Some(dir.join(format!("{id}.embcache")))
    }

    /// Chunk embeddings for the corpus, backed by the on-disk cache when
    /// one is configured.
    pub fn dense_index(&self, corpus: &Corpus) -> Result<DenseIndex, PipelineError> {
        match self.cache_path() {
            Some(path) => {
                let mut cache =
                    EmbeddingCache::load(&path, &self.embedder.id(), self.embedder.dim())?;
                let index = DenseIndex::build(corpus, &*self.embedder, Some(&mut cache))?;
                if cache.is_dirty() {
                    cache.save(&path)?;
                }
                Ok(index)
            }
            None => Ok(DenseIndex::build(corpus, &*self.embedder, None)?),
        }
    }

    /// Run the reasoning loop for one question against a prebuilt index.
    pub fn run_query_with_index(
        &self,
        question: &str,
        graph: &mut KnowledgeGraph,
        corpus: &Corpus,
        index: &DenseIndex,
    ) -> Result<RunOutcome, Box<RunFailure>> {
        let embedding_scorer;
        let llm_scorer;
        let scorer: &dyn SubgraphScorer = match self.config.scorer {
            ScorerKind::Embedding => {
                embedding_scorer = EmbeddingScorer::new(&*self.embedder);
                &embedding_scorer
            }
            ScorerKind::Llm => {
                llm_scorer = LlmScorer::new(&*self.chat);
                &llm_scorer
            }
        };
        let ctx = LoopContext {
            chat: &*self.chat,
            embedder: &*self.embedder,
            scorer,
            templates: &self.templates,
            config: &self.config,
        };
        run_query(&ctx, question, graph, corpus, index)
    }

    /// Convenience wrapper that builds the index first.
    pub fn run_query(
        &self,
        question: &str,
        graph: &mut KnowledgeGraph,
        corpus: &Corpus,
    ) -> Result<RunOutcome, Box<RunFailure>> {
        let index = match self.dense_index(corpus) {
            Ok(i) => i,
            Err(e) => {
                return Err(Box::new(RunFailure {
                    error: crate::reasoning::LoopError::Gateway(GatewayError::ProtocolViolation(
                        format!("dense index: {e}"),
                    )),
                    traces: Vec::new(),
                }))
            }
        };
        self.run_query_with_index(question, graph, corpus, &index)
    }
}
