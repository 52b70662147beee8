//! Parser and validator for the bracketed entity/relation records the
//! extraction prompts ask the model to emit:
//!
//! ```text
//! [entity | E1 | Person | "Marie Curie" | Physicist and chemist]
//! [relation | E1 | shared Nobel Prize with | E2 | "exact quote"]
//! ```
//!
//! Field splitting is quote-aware, so `|` may appear inside quoted names
//! and evidence but nowhere else. Lines that are not records are skipped
//! and tallied; the parser never panics on arbitrary input.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An `[entity | ...]` record as emitted by the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEntityRecord {
    /// `E` followed by a positive decimal integer, no leading zeros.
    pub eid: String,
    pub entity_type: String,
    pub name: String,
    pub description: String,
}

/// A `[relation | ...]` record as emitted by the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRelationRecord {
    pub source_eid: String,
    pub predicate: String,
    pub target_eid: String,
    pub evidence: String,
}

/// All records parsed from one model response, tied to the chunk the
/// input text came from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtractionBatch {
    pub entities: Vec<RawEntityRecord>,
    pub relations: Vec<RawRelationRecord>,
    pub source_chunk: String,
}

impl ExtractionBatch {
    pub fn empty(source_chunk: impl Into<String>) -> Self {
        Self {
            entities: Vec::new(),
            relations: Vec::new(),
            source_chunk: source_chunk.into(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty()
    }
}

/// Violations of the record grammar or of the prompt's consistency rules.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractionError {
    #[error("line {line}: malformed record: {cause}")]
    MalformedRecord { line: usize, cause: String },
    #[error("relation ({relation}) references unregistered EID {eid}")]
    UnregisteredEid { relation: String, eid: String },
    #[error("duplicate EID {eid}")]
    DuplicateEid { eid: String },
    #[error("broken EID sequence: expected {expected}, found {found}")]
    BrokenSequence { expected: String, found: String },
}

/// How [`validate_batch`] treats violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    /// Any violation rejects the whole batch.
    Strict,
    /// Offending relations (and later duplicates of an EID) are dropped;
    /// remaining EIDs are preserved, never renumbered.
    Lenient,
}

/// Result of parsing one model response.
#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub batch: ExtractionBatch,
    pub errors: Vec<ExtractionError>,
    /// Non-record lines skipped (model prose around the blocks).
    pub skipped_lines: usize,
}

fn eid_number(eid: &str) -> Option<u64> {
    let digits = eid.strip_prefix('E')?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    digits.parse().ok()
}

/// Split record content on `|`, treating `|` inside double quotes as
/// literal. Fields come back trimmed.
fn split_fields(content: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut in_quotes = false;
    for ch in content.chars() {
        match ch {
            '"' => {
                in_quotes = !in_quotes;
                current.push(ch);
            }
            '|' if !in_quotes => {
                fields.push(current.trim().to_string());
                current = String::new();
            }
            _ => current.push(ch),
        }
    }
    fields.push(current.trim().to_string());
    fields
}

fn unquote(field: &str) -> String {
    let f = field.trim();
    if f.len() >= 2 && f.starts_with('"') && f.ends_with('"') {
        f[1..f.len() - 1].to_string()
    } else {
        f.to_string()
    }
}

/// Parse one model response into records plus per-line errors. Lines that
/// do not start an entity/relation record are ignored and tallied.
pub fn parse_extraction(text: &str, chunk_ref: &str) -> ParseOutcome {
    let mut outcome = ParseOutcome {
        batch: ExtractionBatch::empty(chunk_ref),
        ..Default::default()
    };
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        let lower = line.to_lowercase();
        let is_entity = lower.starts_with("[entity");
        let is_relation = lower.starts_with("[relation");
        if !is_entity && !is_relation {
            if !line.is_empty() {
                outcome.skipped_lines += 1;
            }
            continue;
        }
        let Some(content) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) else {
            outcome.errors.push(ExtractionError::MalformedRecord {
                line: line_no,
                cause: "record not closed with ']'".into(),
            });
            continue;
        };
        let fields = split_fields(content);
        if fields.len() != 5 {
            outcome.errors.push(ExtractionError::MalformedRecord {
                line: line_no,
                cause: format!("expected 5 fields, found {}", fields.len()),
            });
            continue;
        }
        if is_entity {
            let eid = fields[1].clone();
            if eid_number(&eid).is_none() {
                outcome.errors.push(ExtractionError::MalformedRecord {
                    line: line_no,
                    cause: format!("invalid EID {eid:?}"),
                });
                continue;
            }
            let name = unquote(&fields[3]);
            if name.is_empty() {
                outcome.errors.push(ExtractionError::MalformedRecord {
                    line: line_no,
                    cause: "empty entity name".into(),
                });
                continue;
            }
            outcome.batch.entities.push(RawEntityRecord {
                eid,
                entity_type: fields[2].clone(),
                name,
                description: fields[4].clone(),
            });
        } else {
            let source_eid = fields[1].clone();
            let target_eid = fields[3].clone();
            if eid_number(&source_eid).is_none() || eid_number(&target_eid).is_none() {
                outcome.errors.push(ExtractionError::MalformedRecord {
                    line: line_no,
                    cause: format!("invalid relation EIDs {source_eid:?} / {target_eid:?}"),
                });
                continue;
            }
            let predicate = fields[2].clone();
            if predicate.is_empty() {
                outcome.errors.push(ExtractionError::MalformedRecord {
                    line: line_no,
                    cause: "empty predicate".into(),
                });
                continue;
            }
            outcome.batch.relations.push(RawRelationRecord {
                source_eid,
                predicate,
                target_eid,
                evidence: unquote(&fields[4]),
            });
        }
    }
    outcome
}

/// Render a batch back into record lines, entities first. Inverse of
/// [`parse_extraction`] modulo whitespace.
pub fn serialize_batch(batch: &ExtractionBatch) -> String {
    let mut out = String::new();
    for e in &batch.entities {
        out.push_str(&format!(
            "[entity | {} | {} | \"{}\" | {}]\n",
            e.eid, e.entity_type, e.name, e.description
        ));
    }
    for r in &batch.relations {
        out.push_str(&format!(
            "[relation | {} | {} | {} | \"{}\"]\n",
            r.source_eid, r.predicate, r.target_eid, r.evidence
        ));
    }
    out
}

/// Apply the prompt's consistency rules: no duplicate EIDs, unbroken
/// `E1..En` sequence, no relation referencing an unregistered EID.
pub fn validate_batch(
    batch: &ExtractionBatch,
    mode: ValidationMode,
) -> (ExtractionBatch, Vec<ExtractionError>) {
    let mut errors = Vec::new();

    // Duplicates: first occurrence binds the EID.
    let mut seen = std::collections::BTreeSet::new();
    let mut entities = Vec::new();
    for e in &batch.entities {
        if seen.insert(e.eid.clone()) {
            entities.push(e.clone());
        } else {
            errors.push(ExtractionError::DuplicateEid { eid: e.eid.clone() });
        }
    }

    // Sequence check over the deduplicated order; report the first break.
    for (i, e) in entities.iter().enumerate() {
        let expected = (i + 1) as u64;
        if eid_number(&e.eid) != Some(expected) {
            errors.push(ExtractionError::BrokenSequence {
                expected: format!("E{expected}"),
                found: e.eid.clone(),
            });
            break;
        }
    }

    // Bi-directional EID verification: every relation endpoint must be a
    // registered entity.
    let registered: std::collections::BTreeSet<&str> =
        entities.iter().map(|e| e.eid.as_str()).collect();
    let mut relations = Vec::new();
    for r in &batch.relations {
        let mut dangling = None;
        if !registered.contains(r.source_eid.as_str()) {
            dangling = Some(r.source_eid.clone());
        } else if !registered.contains(r.target_eid.as_str()) {
            dangling = Some(r.target_eid.clone());
        }
        if let Some(eid) = dangling {
            errors.push(ExtractionError::UnregisteredEid {
                relation: format!("{} {} {}", r.source_eid, r.predicate, r.target_eid),
                eid,
            });
        } else {
            relations.push(r.clone());
        }
    }

    match mode {
        ValidationMode::Strict if !errors.is_empty() => {
            (ExtractionBatch::empty(&batch.source_chunk), errors)
        }
        _ => (
            ExtractionBatch {
                entities,
                relations,
                source_chunk: batch.source_chunk.clone(),
            },
            errors,
        ),
    }
}

/// Parse and validate in one step.
pub fn parse_and_validate(
    text: &str,
    chunk_ref: &str,
    mode: ValidationMode,
) -> (ExtractionBatch, Vec<ExtractionError>, usize) {
    let outcome = parse_extraction(text, chunk_ref);
    let (batch, mut errors) = validate_batch(&outcome.batch, mode);
    let mut all = outcome.errors;
    all.append(&mut errors);
    (batch, all, outcome.skipped_lines)
}
