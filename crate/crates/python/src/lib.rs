//! Python bindings: the main pipeline types and operations exposed as a
//! `tcrqf` extension module. Offline-only surface — the engine runs on
//! replay fixtures with the deterministic mock embedder, so Python-side
//! experiments reproduce Rust-side runs exactly.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tcrqf_core::config::{RunConfig, Transport};
use tcrqf_core::corpus::SentenceSplitter;
use tcrqf_core::extraction::{parse_and_validate, ValidationMode};
use tcrqf_core::gateway::EmbeddingVector;

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Whitespace word tokenization.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    tcrqf_core::corpus::tokenize(text)
        .into_iter()
        .map(str::to_string)
        .collect()
}

/// Rule-based sentence segmentation with the default abbreviation guard.
#[pyfunction]
fn split_sentences(text: &str) -> Vec<String> {
    SentenceSplitter::default().split_text(text)
}

/// The triple template "head predicate tail".
#[pyfunction]
fn verbalize(head: &str, predicate: &str, tail: &str) -> String {
    tcrqf_core::restoration::verbalize(head, predicate, tail)
}

/// Cosine similarity of two equal-length nonzero vectors.
#[pyfunction]
fn cosine(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    tcrqf_core::retrieval::cosine(&EmbeddingVector::new(u), &EmbeddingVector::new(v))
        .map_err(value_err)
}

/// Extractive-QA answer normalization.
#[pyfunction]
fn normalize_answer(s: &str) -> String {
    tcrqf_core::eval::normalize_answer(s)
}

/// 1 iff the normalized prediction equals any normalized gold.
#[pyfunction]
fn exact_match(pred: &str, golds: Vec<String>) -> u8 {
    tcrqf_core::eval::exact_match(pred, &golds)
}

/// Max over golds of token-multiset F1.
#[pyfunction]
fn token_f1(pred: &str, golds: Vec<String>) -> f64 {
    tcrqf_core::eval::token_f1(pred, &golds)
}

/// Hex SHA-256 of a rendered prompt; the replay fixture key.
#[pyfunction]
fn prompt_hash(prompt: &str) -> String {
    tcrqf_core::gateway::prompt_hash(prompt)
}

/// Parse model extraction output. Returns (entities, relations, errors)
/// where entities are (eid, type, name, description) tuples and
/// relations are (source_eid, predicate, target_eid, evidence) tuples.
#[pyfunction]
#[pyo3(signature = (text, chunk_ref = "py", lenient = true))]
#[allow(clippy::type_complexity)]
fn parse_extraction(
    text: &str,
    chunk_ref: &str,
    lenient: bool,
) -> (
    Vec<(String, String, String, String)>,
    Vec<(String, String, String, String)>,
    Vec<String>,
) {
    let mode = if lenient {
        ValidationMode::Lenient
    } else {
        ValidationMode::Strict
    };
    let (batch, errors, _) = parse_and_validate(text, chunk_ref, mode);
    (
        batch
            .entities
            .into_iter()
            .map(|e| (e.eid, e.entity_type, e.name, e.description))
            .collect(),
        batch
            .relations
            .into_iter()
            .map(|r| (r.source_eid, r.predicate, r.target_eid, r.evidence))
            .collect(),
        errors.iter().map(|e| e.to_string()).collect(),
    )
}

/// A chunked document corpus.
#[pyclass]
struct Corpus {
    inner: tcrqf_core::corpus::Corpus,
}

#[pymethods]
impl Corpus {
    /// Load a JSON Lines corpus of {"id","title","text"} documents.
    #[staticmethod]
    #[pyo3(signature = (path, max_len = 512, overlap = 64))]
    fn from_jsonl(path: PathBuf, max_len: usize, overlap: usize) -> PyResult<Self> {
        let file = std::fs::File::open(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let inner =
            tcrqf_core::corpus::Corpus::from_jsonl(std::io::BufReader::new(file), max_len, overlap)
                .map_err(value_err)?;
        Ok(Self { inner })
    }

    fn document_count(&self) -> usize {
        self.inner.documents().len()
    }

    fn chunk_count(&self) -> usize {
        self.inner.chunks().len()
    }

    fn chunk_ids(&self) -> Vec<String> {
        self.inner.chunks().iter().map(|c| c.chunk_id.clone()).collect()
    }

    fn chunk_text(&self, chunk_id: &str) -> Option<String> {
        self.inner.chunk(chunk_id).map(|c| c.text.clone())
    }

    fn __len__(&self) -> usize {
        self.chunk_count()
    }
}

/// The mutable knowledge graph.
#[pyclass]
struct KnowledgeGraph {
    inner: tcrqf_core::graph::KnowledgeGraph,
}

#[pymethods]
impl KnowledgeGraph {
    #[new]
    fn new() -> Self {
        Self {
            inner: tcrqf_core::graph::KnowledgeGraph::new(),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Self {
            inner: tcrqf_core::graph::KnowledgeGraph::load(&text).map_err(value_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        std::fs::write(&path, self.inner.persist()).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn round(&self) -> u32 {
        self.inner.round()
    }

    /// (round, nodes, edges) at call time.
    fn stats(&self) -> (u32, usize, usize) {
        let s = self.inner.snapshot_stats();
        (s.round, s.nodes, s.edges)
    }

    fn entity_names(&self) -> Vec<String> {
        self.inner.entities().map(|e| e.name.clone()).collect()
    }

    /// Parse extraction text (lenient) and merge it; returns the net new
    /// (entities, relations).
    #[pyo3(signature = (text, chunk_ref = "py", dedup_threshold = 0.2))]
    fn merge_extraction_text(
        &mut self,
        text: &str,
        chunk_ref: &str,
        dedup_threshold: f64,
    ) -> PyResult<(usize, usize)> {
        let (batch, _, _) = parse_and_validate(text, chunk_ref, ValidationMode::Lenient);
        self.inner
            .merge_extraction(&batch, dedup_threshold)
            .map_err(runtime_err)
    }
}

/// One reasoning round as seen from Python.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Round {
    #[pyo3(get)]
    round: u32,
    #[pyo3(get)]
    answer: String,
    #[pyo3(get)]
    sub_questions: Vec<String>,
    #[pyo3(get)]
    entities_added: usize,
    #[pyo3(get)]
    relations_added: usize,
    #[pyo3(get)]
    nodes: usize,
    #[pyo3(get)]
    edges: usize,
}

/// The offline engine: replay transport plus mock embedder.
#[pyclass]
struct Engine {
    inner: tcrqf_core::pipeline::Engine,
}

#[pymethods]
impl Engine {
    #[new]
    #[pyo3(signature = (
        replay_path,
        max_len = 512,
        overlap = 64,
        beam_width = 3,
        max_depth = 3,
        seed_k = 3,
        dedup_threshold = 0.2,
        enrich_k = 5,
        i_max = 20,
        embed_dim = 32,
        embed_seed = 42,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        replay_path: PathBuf,
        max_len: usize,
        overlap: usize,
        beam_width: usize,
        max_depth: usize,
        seed_k: usize,
        dedup_threshold: f64,
        enrich_k: usize,
        i_max: u32,
        embed_dim: usize,
        embed_seed: u64,
    ) -> PyResult<Self> {
        let config = RunConfig {
            max_len,
            overlap,
            beam_width,
            max_depth,
            seed_k,
            dedup_threshold,
            enrich_k,
            i_max,
            transport: Transport::Replay,
            replay_path: Some(replay_path),
            embed_dim,
            embed_seed,
            ..Default::default()
        };
        let inner = tcrqf_core::pipeline::Engine::from_config(config).map_err(runtime_err)?;
        Ok(Self { inner })
    }

    /// Build the round-0 graph from a corpus via the extraction prompt.
    fn build_graph(&self, corpus: &Corpus) -> PyResult<KnowledgeGraph> {
        let (graph, _) = self.inner.build_graph(&corpus.inner).map_err(runtime_err)?;
        Ok(KnowledgeGraph { inner: graph })
    }

    /// Run the reasoning loop; returns (final_answer, rounds).
    fn query(
        &self,
        question: &str,
        graph: &mut KnowledgeGraph,
        corpus: &Corpus,
    ) -> PyResult<(String, Vec<Round>)> {
        let outcome = self
            .inner
            .run_query(question, &mut graph.inner, &corpus.inner)
            .map_err(|f| runtime_err(&*f))?;
        let rounds = outcome
            .traces
            .iter()
            .map(|t| Round {
                round: t.round,
                answer: t.answer.final_answer.clone(),
                sub_questions: t.sub_questions.questions.clone(),
                entities_added: t.enrichment.entities_added,
                relations_added: t.enrichment.relations_added,
                nodes: t.stats.nodes,
                edges: t.stats.edges,
            })
            .collect();
        Ok((outcome.answer.final_answer, rounds))
    }
}

#[pymodule]
fn tcrqf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(split_sentences, m)?)?;
    m.add_function(wrap_pyfunction!(verbalize, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_answer, m)?)?;
    m.add_function(wrap_pyfunction!(exact_match, m)?)?;
    m.add_function(wrap_pyfunction!(token_f1, m)?)?;
    m.add_function(wrap_pyfunction!(prompt_hash, m)?)?;
    m.add_function(wrap_pyfunction!(parse_extraction, m)?)?;
    m.add_class::<Corpus>()?;
    m.add_class::<KnowledgeGraph>()?;
    m.add_class::<Round>()?;
    m.add_class::<Engine>()?;
    Ok(())
}
