//! GraphRAG engine combining triple context restoration with query-driven
//! knowledge-graph feedback.
//!
//! The pipeline builds a knowledge graph from documents with LLM triple
//! extraction, retrieves query-relevant subgraphs by beam search, traces
//! each retrieved triple back to its most similar source sentence, and
//! iterates: answer, identify missing knowledge as sub-questions, enrich
//! the graph from densely retrieved text, and re-answer until the gap
//! closes or the round budget runs out.
//!
//! Everything is runnable offline: a replay transport serves recorded
//! responses keyed by prompt hash, and a deterministic mock embedder
//! makes cosine comparisons reproducible, so whole runs are
//! bit-identical given the same corpus and fixture.

pub mod config;
pub mod corpus;
pub mod embed_cache;
pub mod eval;
pub mod extraction;
pub mod gateway;
pub mod graph;
pub mod pipeline;
pub mod reasoning;
pub mod restoration;
pub mod retrieval;

pub use config::{EmbedderKind, FeedbackMode, RunConfig, ScorerKind, Transport};
pub use corpus::{split_document, split_sentences, tokenize, Chunk, Corpus, Document, Sentence};
pub use extraction::{
    parse_and_validate, parse_extraction, serialize_batch, validate_batch, ExtractionBatch,
    RawEntityRecord, RawRelationRecord, ValidationMode,
};
pub use gateway::{
    prompt_hash, render, ChatBackend, Embedder, EmbeddingVector, GatewayError, MockEmbedder,
    PromptTemplate, RecordingChat, ReplayChat, ScriptedChat, ScriptedRule, TemplateName,
    TemplateSet,
};
pub use graph::{Entity, EntityId, GraphStats, KnowledgeGraph, Relation};
pub use pipeline::{BuildReport, Engine, PipelineError};
pub use reasoning::{
    run_query, LoopContext, ReasoningAnswer, RoundTrace, RunFailure, RunOutcome, SubQuestionSet,
};
pub use restoration::{restore_context, restore_subgraph, verbalize, AugmentedTriple};
pub use retrieval::{
    beam_search_subgraph, cosine, seed_entities, DenseIndex, EmbeddingScorer, PathElement,
    RankedChunk, Subgraph, SubgraphScorer,
};
