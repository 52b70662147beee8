//! The mutable knowledge graph: entities and evidence-bearing relations
//! with chunk provenance, name-based entity merging, edit-distance
//! relation deduplication, round-stamped growth statistics, and JSON
//! Lines persistence.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::ExtractionBatch;

/// Stable opaque entity identifier; merges keep the older id.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct EntityId(pub u64);

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("relation endpoint {0:?} does not resolve to an entity")]
    DanglingEndpoint(EntityId),
    #[error("batch relation references EID {0} with no entity in the batch")]
    UnresolvedBatchEid(String),
    #[error("graph file line {line}: {cause}")]
    Parse { line: usize, cause: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A graph node. `sources` records every chunk the entity was extracted
/// from; descriptions keep the longest variant seen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    pub entity_type: String,
    pub description: String,
    pub sources: BTreeSet<String>,
    pub created_round: u32,
}

/// A directed, evidence-bearing edge between two entities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub head: EntityId,
    pub predicate: String,
    pub tail: EntityId,
    pub evidence: String,
    pub sources: BTreeSet<String>,
    pub created_round: u32,
}

/// Node/edge counts stamped with the graph round they were taken at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub round: u32,
    pub nodes: usize,
    pub edges: usize,
}

/// Outcome of inserting a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationOutcome {
    Added,
    /// Deduplicated against an existing relation on the same endpoints.
    Merged,
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut current = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        current[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            current[j + 1] = substitution.min(prev[j + 1] + 1).min(current[j] + 1);
        }
        std::mem::swap(&mut prev, &mut current);
    }
    prev[b.len()]
}

/// Levenshtein normalized by the longer string's char count; 0 for two
/// empty strings.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / max_len as f64
}

/// Unicode case-fold plus whitespace collapse; the entity-merge key.
pub fn normalize_name(name: &str) -> String {
    name.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum GraphRecord {
    Header {
        schema_version: u32,
        round: u32,
        next_id: u64,
    },
    Entity(Entity),
    Relation(Relation),
}

const SCHEMA_VERSION: u32 = 1;

/// The knowledge graph. Single writer; readers work against clones or
/// immutable borrows taken at round start.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: BTreeMap<EntityId, Entity>,
    relations: Vec<Relation>,
    name_index: BTreeMap<String, EntityId>,
    pair_index: BTreeMap<(EntityId, EntityId), Vec<usize>>,
    incident: BTreeMap<EntityId, Vec<usize>>,
    round: u32,
    next_id: u64,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    /// Advance the round stamp; growth from here on belongs to the new
    /// round.
    pub fn set_round(&mut self, round: u32) {
        self.round = round;
    }

    pub fn node_count(&self) -> usize {
        self.entities.len()
    }

    pub fn edge_count(&self) -> usize {
        self.relations.len()
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(&id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn entity_by_name(&self, name: &str) -> Option<&Entity> {
        self.name_index
            .get(&normalize_name(name))
            .and_then(|id| self.entities.get(id))
    }

    /// Relation indices incident to an entity, either direction.
    pub fn incident_relations(&self, id: EntityId) -> &[usize] {
        self.incident.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn relation(&self, index: usize) -> Option<&Relation> {
        self.relations.get(index)
    }

    /// Insert or merge an entity record. Merging unions sources, keeps
    /// the older id and the longer description.
    pub fn upsert_entity(&mut self, rec: &crate::extraction::RawEntityRecord, chunk: &str) -> EntityId {
        let key = normalize_name(&rec.name);
        if let Some(&id) = self.name_index.get(&key) {
            let entity = self.entities.get_mut(&id).expect("index points at entity");
            entity.sources.insert(chunk.to_string());
            if rec.description.len() > entity.description.len() {
                entity.description = rec.description.clone();
            }
            return id;
        }
        let id = EntityId(self.next_id);
        self.next_id += 1;
        let mut sources = BTreeSet::new();
        sources.insert(chunk.to_string());
        self.entities.insert(
            id,
            Entity {
                id,
                name: rec.name.clone(),
                entity_type: rec.entity_type.clone(),
                description: rec.description.clone(),
                sources,
                created_round: self.round,
            },
        );
        self.name_index.insert(key, id);
        id
    }

    /// Insert a relation unless an existing relation on the same
    /// `(head, tail)` pair is within `threshold` normalized edit distance
    /// of the candidate key `"head_name|predicate|tail_name"`; duplicates
    /// merge sources and keep the existing predicate.
    pub fn add_relation(
        &mut self,
        head: EntityId,
        predicate: &str,
        tail: EntityId,
        evidence: &str,
        chunk: &str,
        threshold: f64,
    ) -> Result<RelationOutcome, GraphError> {
        let head_name = self
            .entities
            .get(&head)
            .ok_or(GraphError::DanglingEndpoint(head))?
            .name
            .clone();
        let tail_name = self
            .entities
            .get(&tail)
            .ok_or(GraphError::DanglingEndpoint(tail))?
            .name
            .clone();
        let candidate_key = format!("{head_name}|{predicate}|{tail_name}");

        let mut best: Option<(f64, usize)> = None;
        if let Some(indices) = self.pair_index.get(&(head, tail)) {
            for &idx in indices {
                let existing = &self.relations[idx];
                let existing_key =
                    format!("{head_name}|{}|{tail_name}", existing.predicate);
                let d = normalized_levenshtein(&candidate_key, &existing_key);
                if best.map(|(b, _)| d < b).unwrap_or(true) {
                    best = Some((d, idx));
                }
            }
        }
        if let Some((distance, idx)) = best {
            if distance <= threshold {
                self.relations[idx].sources.insert(chunk.to_string());
                return Ok(RelationOutcome::Merged);
            }
        }

        let idx = self.relations.len();
        let mut sources = BTreeSet::new();
        sources.insert(chunk.to_string());
        self.relations.push(Relation {
            head,
            predicate: predicate.to_string(),
            tail,
            evidence: evidence.to_string(),
            sources,
            created_round: self.round,
        });
        self.pair_index.entry((head, tail)).or_default().push(idx);
        self.incident.entry(head).or_default().push(idx);
        if tail != head {
            self.incident.entry(tail).or_default().push(idx);
        }
        Ok(RelationOutcome::Added)
    }

    /// Merge a validated extraction batch: entities first, then relations
    /// with batch-local EID resolution. Returns net new (nodes, edges).
    pub fn merge_extraction(
        &mut self,
        batch: &ExtractionBatch,
        threshold: f64,
    ) -> Result<(usize, usize), GraphError> {
        let nodes_before = self.node_count();
        let edges_before = self.edge_count();
        let mut by_eid: BTreeMap<&str, EntityId> = BTreeMap::new();
        for rec in &batch.entities {
            let id = self.upsert_entity(rec, &batch.source_chunk);
            by_eid.insert(rec.eid.as_str(), id);
        }
        for rel in &batch.relations {
            let head = *by_eid
                .get(rel.source_eid.as_str())
                .ok_or_else(|| GraphError::UnresolvedBatchEid(rel.source_eid.clone()))?;
            let tail = *by_eid
                .get(rel.target_eid.as_str())
                .ok_or_else(|| GraphError::UnresolvedBatchEid(rel.target_eid.clone()))?;
            self.add_relation(
                head,
                &rel.predicate,
                tail,
                &rel.evidence,
                &batch.source_chunk,
                threshold,
            )?;
        }
        Ok((
            self.node_count() - nodes_before,
            self.edge_count() - edges_before,
        ))
    }

    /// Union of the two entities' source-chunk sets.
    pub fn sources_of_pair(
        &self,
        head: EntityId,
        tail: EntityId,
    ) -> Result<BTreeSet<String>, GraphError> {
        let h = self
            .entities
            .get(&head)
            .ok_or(GraphError::DanglingEndpoint(head))?;
        let t = self
            .entities
            .get(&tail)
            .ok_or(GraphError::DanglingEndpoint(tail))?;
        Ok(h.sources.union(&t.sources).cloned().collect())
    }

    pub fn snapshot_stats(&self) -> GraphStats {
        GraphStats {
            round: self.round,
            nodes: self.node_count(),
            edges: self.edge_count(),
        }
    }

    /// Serialize as JSON Lines: header record, entities by id, relations
    /// in insertion order. Deterministic byte-for-byte.
    pub fn persist(&self) -> String {
        let mut out = String::new();
        let mut push = |record: &GraphRecord| {
            out.push_str(&serde_json::to_string(record).expect("graph record serializes"));
            out.push('\n');
        };
        push(&GraphRecord::Header {
            schema_version: SCHEMA_VERSION,
            round: self.round,
            next_id: self.next_id,
        });
        for entity in self.entities.values() {
            push(&GraphRecord::Entity(entity.clone()));
        }
        for relation in &self.relations {
            push(&GraphRecord::Relation(relation.clone()));
        }
        out
    }

    pub fn load(data: &str) -> Result<Self, GraphError> {
        let mut graph = KnowledgeGraph::new();
        let mut saw_header = false;
        for (i, line) in data.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: GraphRecord =
                serde_json::from_str(line).map_err(|e| GraphError::Parse {
                    line: i + 1,
                    cause: e.to_string(),
                })?;
            match record {
                GraphRecord::Header {
                    schema_version,
                    round,
                    next_id,
                } => {
                    if schema_version != SCHEMA_VERSION {
                        return Err(GraphError::Parse {
                            line: i + 1,
                            cause: format!("unsupported schema version {schema_version}"),
                        });
                    }
                    graph.round = round;
                    graph.next_id = next_id;
                    saw_header = true;
                }
                GraphRecord::Entity(entity) => {
                    graph.name_index.insert(normalize_name(&entity.name), entity.id);
                    graph.entities.insert(entity.id, entity);
                }
                GraphRecord::Relation(relation) => {
                    for end in [relation.head, relation.tail] {
                        if !graph.entities.contains_key(&end) {
                            return Err(GraphError::Parse {
                                line: i + 1,
                                cause: format!("relation endpoint {end:?} undefined"),
                            });
                        }
                    }
                    let idx = graph.relations.len();
                    graph
                        .pair_index
                        .entry((relation.head, relation.tail))
                        .or_default()
                        .push(idx);
                    graph.incident.entry(relation.head).or_default().push(idx);
                    if relation.tail != relation.head {
                        graph.incident.entry(relation.tail).or_default().push(idx);
                    }
                    graph.relations.push(relation);
                }
            }
        }
        if !saw_header {
            return Err(GraphError::Parse {
                line: 0,
                cause: "missing header record".into(),
            });
        }
        Ok(graph)
    }

    /// Full-scan referential integrity check.
    pub fn check_integrity(&self) -> Result<(), GraphError> {
        for relation in &self.relations {
            for end in [relation.head, relation.tail] {
                if !self.entities.contains_key(&end) {
                    return Err(GraphError::DanglingEndpoint(end));
                }
            }
        }
        Ok(())
    }
}
