//! Query-relevant retrieval over graph snapshots: beam search with
//! per-depth pruning for subgraphs, and dense cosine-similarity ranking
//! for corpus chunks. Everything here reads a snapshot and never mutates
//! the graph.

use std::collections::BTreeMap;
use std::sync::Mutex;

use thiserror::Error;

use crate::corpus::Corpus;
use crate::embed_cache::EmbeddingCache;
use crate::gateway::{ChatBackend, Embedder, EmbeddingVector, GatewayError};
use crate::graph::{EntityId, KnowledgeGraph};
use crate::restoration::verbalize;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// One traversed relation, recorded exactly as stored in the graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PathElement {
    pub head: EntityId,
    pub predicate: String,
    pub tail: EntityId,
}

/// Paths surviving the beam, best first. `score` is the sum of the
/// surviving path scores.
#[derive(Debug, Clone, Default)]
pub struct Subgraph {
    pub paths: Vec<Vec<PathElement>>,
    pub score: f64,
}

impl Subgraph {
    /// Unique triples across all paths, first-occurrence order.
    pub fn unique_triples(&self) -> Vec<PathElement> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for path in &self.paths {
            for el in path {
                if seen.insert(el.clone()) {
                    out.push(el.clone());
                }
            }
        }
        out
    }
}

/// A chunk ranked by similarity to a query.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedChunk {
    pub chunk_id: String,
    pub similarity: f64,
}

/// Cosine similarity of two equal-dimension nonzero vectors.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if u.dim() != v.dim() {
        return Err(RetrievalError::DimensionMismatch(u.dim(), v.dim()));
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.values().iter().zip(v.values()) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    Ok(dot / (nu.sqrt() * nv.sqrt()))
}

/// Rank entities by cosine between the query embedding and the embedding
/// of `"name: description"`; ties break toward the smaller entity id.
pub fn seed_entities(
    graph: &KnowledgeGraph,
    query: &str,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<Vec<EntityId>, RetrievalError> {
    let entities: Vec<&crate::graph::Entity> = graph.entities().collect();
    if entities.is_empty() || k == 0 {
        return Ok(Vec::new());
    }
    let mut texts = Vec::with_capacity(entities.len() + 1);
    texts.push(query.to_string());
    texts.extend(
        entities
            .iter()
            .map(|e| entity_text(&e.name, &e.description)),
    );
    let vectors = embedder.embed(&texts)?;
    let query_vec = &vectors[0];
    let mut scored: Vec<(f64, EntityId)> = entities
        .iter()
        .zip(&vectors[1..])
        .map(|(e, v)| Ok((cosine(query_vec, v)?, e.id)))
        .collect::<Result<_, RetrievalError>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    Ok(scored.into_iter().map(|(_, id)| id).collect())
}

/// Text embedded for entity seeding.
pub fn entity_text(name: &str, description: &str) -> String {
    if description.is_empty() {
        name.to_string()
    } else {
        format!("{name}: {description}")
    }
}

/// Ranks candidate path extensions against the query. Implementations
/// must be deterministic for the offline pipeline.
pub trait SubgraphScorer: Send + Sync {
    fn score(&self, query: &str, candidates: &[String]) -> Result<Vec<f64>, RetrievalError>;
}

/// Deterministic scorer: cosine between query and verbalized triple.
pub struct EmbeddingScorer<'a> {
    embedder: &'a dyn Embedder,
    query_cache: Mutex<BTreeMap<String, EmbeddingVector>>,
}

impl<'a> EmbeddingScorer<'a> {
    pub fn new(embedder: &'a dyn Embedder) -> Self {
        Self {
            embedder,
            query_cache: Mutex::new(BTreeMap::new()),
        }
    }
}

impl SubgraphScorer for EmbeddingScorer<'_> {
    fn score(&self, query: &str, candidates: &[String]) -> Result<Vec<f64>, RetrievalError> {
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let query_vec = {
            let mut cache = self.query_cache.lock().unwrap();
            if let Some(v) = cache.get(query) {
                v.clone()
            } else {
                let v = self.embedder.embed_one(query)?;
                cache.insert(query.to_string(), v.clone());
                v
            }
        };
        let vectors = self.embedder.embed(candidates)?;
        vectors
            .iter()
            .map(|v| cosine(&query_vec, v).or(Ok(0.0)))
            .collect()
    }
}

/// LLM-guided pruning scorer. The prompt asks for one `index: score`
/// line per candidate; unparseable lines score 0. This prompt is this
/// project's own addition, used only when an LLM is in the loop; the
/// deterministic embedding scorer is the offline default.
pub struct LlmScorer<'a> {
    chat: &'a dyn ChatBackend,
}

impl<'a> LlmScorer<'a> {
    pub fn new(chat: &'a dyn ChatBackend) -> Self {
        Self { chat }
    }
}

impl SubgraphScorer for LlmScorer<'_> {
    fn score(&self, query: &str, candidates: &[String]) -> Result<Vec<f64>, RetrievalError> {
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let mut prompt = String::from(
            "Rate how relevant each knowledge-graph path extension is to the question, \
             on a 0-10 scale. Output one line per candidate in the form `index: score`, \
             nothing else.\nQuestion: ",
        );
        prompt.push_str(query);
        prompt.push('\n');
        for (i, c) in candidates.iter().enumerate() {
            prompt.push_str(&format!("{i}: {c}\n"));
        }
        let response = self.chat.complete(&prompt)?;
        let mut scores = vec![0.0; candidates.len()];
        for line in response.lines() {
            if let Some((idx, score)) = line.split_once(':') {
                if let (Ok(i), Ok(s)) = (idx.trim().parse::<usize>(), score.trim().parse::<f64>())
                {
                    if i < scores.len() && s.is_finite() {
                        scores[i] = s;
                    }
                }
            }
        }
        Ok(scores)
    }
}

#[derive(Clone)]
struct PartialPath {
    elements: Vec<usize>,
    frontier: EntityId,
    score: f64,
}

fn path_elements(graph: &KnowledgeGraph, indices: &[usize]) -> Vec<PathElement> {
    indices
        .iter()
        .map(|&i| {
            let r = graph.relation(i).expect("relation index valid");
            PathElement {
                head: r.head,
                predicate: r.predicate.clone(),
                tail: r.tail,
            }
        })
        .collect()
}

/// Beam search from `seeds`: each depth extends every partial path by all
/// incident relations of its frontier entity (a relation may appear once
/// per path; entities may repeat), scores the extensions against the
/// query, and keeps the best `beam_width`. Paths that cannot extend are
/// kept as finished. Returns all surviving non-empty paths.
pub fn beam_search_subgraph(
    graph: &KnowledgeGraph,
    query: &str,
    seeds: &[EntityId],
    beam_width: usize,
    max_depth: usize,
    scorer: &dyn SubgraphScorer,
) -> Result<Subgraph, RetrievalError> {
    assert!(beam_width >= 1, "beam_width must be >= 1");
    assert!(max_depth >= 1, "max_depth must be >= 1");

    let mut beam: Vec<PartialPath> = seeds
        .iter()
        .map(|&id| PartialPath {
            elements: Vec::new(),
            frontier: id,
            score: 0.0,
        })
        .collect();
    let mut finished: Vec<PartialPath> = Vec::new();

    for _ in 0..max_depth {
        if beam.is_empty() {
            break;
        }
        let mut extensions: Vec<PartialPath> = Vec::new();
        let mut verbalized: Vec<String> = Vec::new();
        for path in &beam {
            let mut extended = false;
            for &rel_idx in graph.incident_relations(path.frontier) {
                if path.elements.contains(&rel_idx) {
                    continue;
                }
                let relation = graph.relation(rel_idx).expect("incident index valid");
                let next = if relation.head == path.frontier {
                    relation.tail
                } else {
                    relation.head
                };
                let mut elements = path.elements.clone();
                elements.push(rel_idx);
                extensions.push(PartialPath {
                    elements,
                    frontier: next,
                    score: path.score,
                });
                let head_name = &graph.entity(relation.head).expect("endpoint").name;
                let tail_name = &graph.entity(relation.tail).expect("endpoint").name;
                verbalized.push(verbalize(head_name, &relation.predicate, tail_name));
                extended = true;
            }
            if !extended && !path.elements.is_empty() {
                finished.push(path.clone());
            }
        }
        if extensions.is_empty() {
            beam.clear();
            break;
        }
        let scores = scorer.score(query, &verbalized)?;
        for (path, s) in extensions.iter_mut().zip(scores) {
            path.score += s;
        }
        extensions.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| path_elements(graph, &a.elements).cmp(&path_elements(graph, &b.elements)))
        });
        extensions.truncate(beam_width);
        beam = extensions;
    }
    finished.extend(beam.into_iter().filter(|p| !p.elements.is_empty()));
    finished.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| path_elements(graph, &a.elements).cmp(&path_elements(graph, &b.elements)))
    });

    let score = finished.iter().map(|p| p.score).sum();
    Ok(Subgraph {
        paths: finished
            .iter()
            .map(|p| path_elements(graph, &p.elements))
            .collect(),
        score,
    })
}

/// Chunk embeddings for a corpus, precomputed once and reusable across
/// rounds and queries. Backed by the on-disk cache when one is supplied.
pub struct DenseIndex {
    entries: Vec<(String, EmbeddingVector)>,
}

impl DenseIndex {
    pub fn build(
        corpus: &Corpus,
        embedder: &dyn Embedder,
        cache: Option<&mut EmbeddingCache>,
    ) -> Result<Self, RetrievalError> {
        let mut entries: Vec<(String, EmbeddingVector)> = Vec::new();
        let mut missing: Vec<(String, String)> = Vec::new();
        match cache {
            Some(cache) => {
                for chunk in corpus.chunks() {
                    match cache.get(&chunk.chunk_id, &chunk.text) {
                        Some(v) => entries.push((chunk.chunk_id.clone(), v.clone())),
                        None => missing.push((chunk.chunk_id.clone(), chunk.text.clone())),
                    }
                }
                if !missing.is_empty() {
                    let texts: Vec<String> = missing.iter().map(|(_, t)| t.clone()).collect();
                    let vectors = embedder.embed(&texts)?;
                    for ((chunk_id, text), v) in missing.into_iter().zip(vectors) {
                        cache.put(&chunk_id, &text, v.clone());
                        entries.push((chunk_id, v));
                    }
                }
            }
            None => {
                let texts: Vec<String> =
                    corpus.chunks().iter().map(|c| c.text.clone()).collect();
                if !texts.is_empty() {
                    let vectors = embedder.embed(&texts)?;
                    for (chunk, v) in corpus.chunks().iter().zip(vectors) {
                        entries.push((chunk.chunk_id.clone(), v));
                    }
                }
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Top-k chunks by cosine similarity, ties broken by chunk id.
    pub fn retrieve(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        k: usize,
    ) -> Result<Vec<RankedChunk>, RetrievalError> {
        if self.entries.is_empty() || k == 0 {
            return Ok(Vec::new());
        }
        let query_vec = embedder.embed_one(query)?;
        let mut ranked: Vec<RankedChunk> = self
            .entries
            .iter()
            .map(|(chunk_id, v)| {
                Ok(RankedChunk {
                    chunk_id: chunk_id.clone(),
                    similarity: cosine(&query_vec, v)?,
                })
            })
            .collect::<Result<_, RetrievalError>>()?;
        ranked.sort_by(|a, b| {
            b.similarity
                .total_cmp(&a.similarity)
                .then_with(|| a.chunk_id.cmp(&b.chunk_id))
        });
        ranked.truncate(k);
        Ok(ranked)
    }
}
