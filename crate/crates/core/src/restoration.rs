//! Triple context restoration: for each retrieved triple, find the source
//! sentence most similar to the verbalized triple and attach it. The
//! candidate pool is every sentence of every chunk either endpoint was
//! extracted from; the winner is the cosine argmax with deterministic
//! ties toward the smaller (chunk id, ordinal).

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Sentence, SentenceSplitter};
use crate::gateway::{Embedder, EmbeddingVector};
use crate::graph::{EntityId, GraphError, KnowledgeGraph};
use crate::retrieval::{cosine, PathElement, RetrievalError, Subgraph};

#[derive(Debug, Error)]
pub enum RestoreError {
    #[error("no candidate sentences for triple ({head:?}, {predicate}, {tail:?}); source chunks missing or empty")]
    EmptyCandidateSet {
        head: EntityId,
        predicate: String,
        tail: EntityId,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// A triple with its restored source sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedTriple {
    pub head_name: String,
    pub predicate: String,
    pub tail_name: String,
    pub context_sentence: String,
    pub similarity: f64,
    /// Chunk the winning sentence came from.
    pub sentence_provenance: String,
}

/// The triple template `"head predicate tail"`, single-space joined.
pub fn verbalize(head_name: &str, predicate: &str, tail_name: &str) -> String {
    format!("{head_name} {predicate} {tail_name}")
}

/// Restores context sentences for triples against one graph snapshot.
/// Sentence embeddings are cached per chunk since the same chunks recur
/// across triples and rounds.
pub struct ContextRestorer<'a> {
    graph: &'a KnowledgeGraph,
    corpus: &'a Corpus,
    embedder: &'a dyn Embedder,
    splitter: SentenceSplitter,
    sentence_cache: Mutex<BTreeMap<String, Vec<(Sentence, EmbeddingVector)>>>,
}

impl<'a> ContextRestorer<'a> {
    pub fn new(
        graph: &'a KnowledgeGraph,
        corpus: &'a Corpus,
        embedder: &'a dyn Embedder,
    ) -> Self {
        Self {
            graph,
            corpus,
            embedder,
            splitter: SentenceSplitter::default(),
            sentence_cache: Mutex::new(BTreeMap::new()),
        }
    }

    fn chunk_sentences(
        &self,
        chunk_id: &str,
    ) -> Result<Vec<(Sentence, EmbeddingVector)>, RestoreError> {
        if let Some(cached) = self.sentence_cache.lock().unwrap().get(chunk_id) {
            return Ok(cached.clone());
        }
        let Some(chunk) = self.corpus.chunk(chunk_id) else {
            return Ok(Vec::new());
        };
        let sentences = self.splitter.split(chunk);
        let texts: Vec<String> = sentences.iter().map(|s| s.text.clone()).collect();
        let vectors = if texts.is_empty() {
            Vec::new()
        } else {
            self.embedder.embed(&texts).map_err(RetrievalError::from)?
        };
        let entry: Vec<(Sentence, EmbeddingVector)> =
            sentences.into_iter().zip(vectors).collect();
        self.sentence_cache
            .lock()
            .unwrap()
            .insert(chunk_id.to_string(), entry.clone());
        Ok(entry)
    }

    /// Trace the most relevant source sentence for one triple.
    pub fn restore_context(&self, triple: &PathElement) -> Result<AugmentedTriple, RestoreError> {
        let head = self
            .graph
            .entity(triple.head)
            .ok_or(GraphError::DanglingEndpoint(triple.head))?;
        let tail = self
            .graph
            .entity(triple.tail)
            .ok_or(GraphError::DanglingEndpoint(triple.tail))?;
        let template = verbalize(&head.name, &triple.predicate, &tail.name);

        // BTreeSet union keeps candidate enumeration in chunk-id order,
        // each shared chunk visited once.
        let sources = self.graph.sources_of_pair(triple.head, triple.tail)?;
        let mut best: Option<(f64, &str, usize, String)> = None;
        let template_vec = self
            .embedder
            .embed_one(&template)
            .map_err(RetrievalError::from)?;
        let mut candidates: Vec<(Sentence, EmbeddingVector)> = Vec::new();
        for chunk_id in &sources {
            candidates.extend(self.chunk_sentences(chunk_id)?);
        }
        if candidates.is_empty() {
            return Err(RestoreError::EmptyCandidateSet {
                head: triple.head,
                predicate: triple.predicate.clone(),
                tail: triple.tail,
            });
        }
        for (sentence, vector) in &candidates {
            let similarity = cosine(&template_vec, vector)?;
            let better = match &best {
                None => true,
                Some((s, cid, ord, _)) => {
                    similarity > *s
                        || (similarity == *s
                            && (sentence.chunk_id.as_str(), sentence.ordinal) < (cid, *ord))
                }
            };
            if better {
                best = Some((
                    similarity,
                    sentence.chunk_id.as_str(),
                    sentence.ordinal,
                    sentence.text.clone(),
                ));
            }
        }
        let (similarity, chunk_id, _, text) = best.expect("non-empty candidates");
        Ok(AugmentedTriple {
            head_name: head.name.clone(),
            predicate: triple.predicate.clone(),
            tail_name: tail.name.clone(),
            context_sentence: text,
            similarity,
            sentence_provenance: chunk_id.to_string(),
        })
    }

    /// Restore every unique triple of a retrieved subgraph, preserving
    /// first-occurrence path order.
    pub fn restore_subgraph(&self, subgraph: &Subgraph) -> Result<Vec<AugmentedTriple>, RestoreError> {
        subgraph
            .unique_triples()
            .iter()
            .map(|t| self.restore_context(t))
            .collect()
    }
}

/// One-shot helper mirroring [`ContextRestorer::restore_context`].
pub fn restore_context(
    graph: &KnowledgeGraph,
    corpus: &Corpus,
    embedder: &dyn Embedder,
    triple: &PathElement,
) -> Result<AugmentedTriple, RestoreError> {
    ContextRestorer::new(graph, corpus, embedder).restore_context(triple)
}

/// One-shot helper mirroring [`ContextRestorer::restore_subgraph`].
pub fn restore_subgraph(
    graph: &KnowledgeGraph,
    corpus: &Corpus,
    embedder: &dyn Embedder,
    subgraph: &Subgraph,
) -> Result<Vec<AugmentedTriple>, RestoreError> {
    ContextRestorer::new(graph, corpus, embedder).restore_subgraph(subgraph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Chunk;
    use crate::extraction::RawEntityRecord;
    use crate::gateway::MockEmbedder;

    fn chunk(id: &str, text: &str) -> Chunk {
        Chunk {
            chunk_id: id.into(),
            doc_id: id.into(),
            index: 1,
            start: 1,
            end: text.split_whitespace().count().max(1),
            text: text.into(),
        }
    }

    fn entity_from(g: &mut KnowledgeGraph, name: &str, chunk: &str) -> EntityId {
        g.upsert_entity(
            &RawEntityRecord {
                eid: "E1".into(),
                entity_type: "T".into(),
                name: name.into(),
                description: String::new(),
            },
            chunk,
        )
    }

    #[test]
    fn verbalize_joins_with_single_spaces() {
        assert_eq!(
            verbalize("Inception", "directed by", "Christopher Nolan"),
            "Inception directed by Christopher Nolan"
        );
        assert_eq!(verbalize("A", "r", "B"), "A r B");
        // purity
        assert_eq!(verbalize("A", "r", "B"), verbalize("A", "r", "B"));
    }

    #[test]
    fn singleton_candidate_always_wins() {
        let corpus = Corpus::from_chunks(vec![chunk("c1", "Only one sentence here")]);
        let mut g = KnowledgeGraph::new();
        let h = entity_from(&mut g, "X", "c1");
        let t = entity_from(&mut g, "Y", "c1");
        let embedder = MockEmbedder::new(9, 16);
        let triple = PathElement { head: h, predicate: "rel".into(), tail: t };
        let augmented = restore_context(&g, &corpus, &embedder, &triple).unwrap();
        assert_eq!(augmented.context_sentence, "Only one sentence here");
        assert_eq!(augmented.sentence_provenance, "c1");
    }

    #[test]
    fn sentence_containing_surface_forms_wins() {
        let corpus = Corpus::from_chunks(vec![chunk(
            "c1",
            "Inception directed by Christopher Nolan was a hit. Popcorn sales rose that year.",
        )]);
        let mut g = KnowledgeGraph::new();
        let h = entity_from(&mut g, "Inception", "c1");
        let t = entity_from(&mut g, "Christopher Nolan", "c1");
        let embedder = MockEmbedder::new(42, 32);
        let triple = PathElement { head: h, predicate: "directed by".into(), tail: t };
        let augmented = restore_context(&g, &corpus, &embedder, &triple).unwrap();

        // brute-force oracle over both candidates
        let template = verbalize("Inception", "directed by", "Christopher Nolan");
        let tv = embedder.embed_one(&template).unwrap();
        let sents = SentenceSplitter::default().split(corpus.chunk("c1").unwrap());
        let best = sents
            .iter()
            .map(|s| {
                let v = embedder.embed_one(&s.text).unwrap();
                (cosine(&tv, &v).unwrap(), s.text.clone())
            })
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        assert_eq!(augmented.context_sentence, best.1);
        assert!(augmented.context_sentence.starts_with("Inception directed by"));
        assert!((augmented.similarity - best.0).abs() < 1e-12);
    }

    #[test]
    fn shared_source_chunk_is_enumerated_once() {
        // both endpoints share c1; a duplicated sentence in c2 would win a
        // tie against itself if c1 were enumerated twice with wrong order
        let corpus = Corpus::from_chunks(vec![
            chunk("c1", "Alpha beta gamma."),
            chunk("c2", "Alpha beta gamma."),
        ]);
        let mut g = KnowledgeGraph::new();
        let h = entity_from(&mut g, "H", "c1");
        g.upsert_entity(
            &RawEntityRecord {
                eid: "E1".into(),
                entity_type: "T".into(),
                name: "H".into(),
                description: String::new(),
            },
            "c2",
        );
        let t = entity_from(&mut g, "T", "c1");
        let embedder = MockEmbedder::new(3, 16);
        let triple = PathElement { head: h, predicate: "r".into(), tail: t };
        let augmented = restore_context(&g, &corpus, &embedder, &triple).unwrap();
        // tie between identical sentences resolves to the smaller chunk id
        assert_eq!(augmented.sentence_provenance, "c1");
    }

    #[test]
    fn missing_chunks_yield_empty_candidate_set() {
        let corpus = Corpus::from_chunks(vec![]);
        let mut g = KnowledgeGraph::new();
        let h = entity_from(&mut g, "H", "ghost");
        let t = entity_from(&mut g, "T", "ghost");
        let embedder = MockEmbedder::new(1, 8);
        let triple = PathElement { head: h, predicate: "r".into(), tail: t };
        assert!(matches!(
            restore_context(&g, &corpus, &embedder, &triple),
            Err(RestoreError::EmptyCandidateSet { .. })
        ));
    }

    #[test]
    fn restore_subgraph_dedupes_and_preserves_order() {
        let corpus = Corpus::from_chunks(vec![chunk("c1", "H r T. T s U.")]);
        let mut g = KnowledgeGraph::new();
        let h = entity_from(&mut g, "H", "c1");
        let t = entity_from(&mut g, "T", "c1");
        let u = entity_from(&mut g, "U", "c1");
        let embedder = MockEmbedder::new(5, 16);
        let e1 = PathElement { head: h, predicate: "r".into(), tail: t };
        let e2 = PathElement { head: t, predicate: "s".into(), tail: u };
        let sg = Subgraph {
            paths: vec![vec![e1.clone()], vec![e1.clone(), e2.clone()]],
            score: 0.0,
        };
        let augmented = restore_subgraph(&g, &corpus, &embedder, &sg).unwrap();
        assert_eq!(augmented.len(), 2);
        assert_eq!(augmented[0].head_name, "H");
        assert_eq!(augmented[1].head_name, "T");

        let empty = restore_subgraph(&g, &corpus, &embedder, &Subgraph::default()).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn provenance_points_at_a_source_chunk_sentence() {
        let corpus = Corpus::from_chunks(vec![
            chunk("h1", "The head entity lives here. Another head sentence."),
            chunk("t1", "The tail entity lives here."),
        ]);
        let mut g = KnowledgeGraph::new();
        let h = entity_from(&mut g, "head entity", "h1");
        let t = entity_from(&mut g, "tail entity", "t1");
        let embedder = MockEmbedder::new(11, 32);
        let triple = PathElement { head: h, predicate: "linked to".into(), tail: t };
        let augmented = restore_context(&g, &corpus, &embedder, &triple).unwrap();
        let source = corpus.chunk(&augmented.sentence_provenance).unwrap();
        let sentences = SentenceSplitter::default().split(source);
        assert!(sentences.iter().any(|s| s.text == augmented.context_sentence));
    }
}
