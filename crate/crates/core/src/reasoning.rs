//! The iterative reasoning loop: retrieve a subgraph, restore context,
//! answer, identify missing knowledge as sub-questions, enrich the graph,
//! and repeat until the sub-question set empties or the round budget is
//! spent. Each round reads the graph it started with and writes the next
//! round's graph.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{FeedbackMode, RunConfig};
use crate::corpus::Corpus;
use crate::extraction::{parse_and_validate, ValidationMode};
use crate::gateway::{render, ChatBackend, Embedder, GatewayError, TemplateSet};
use crate::graph::{GraphError, GraphStats, KnowledgeGraph};
use crate::restoration::{verbalize, AugmentedTriple, ContextRestorer, RestoreError};
use crate::retrieval::{
    beam_search_subgraph, seed_entities, DenseIndex, RetrievalError, SubgraphScorer,
};

#[derive(Debug, Error)]
pub enum LoopError {
    #[error("model response has no Final Answer section")]
    MissingFinalAnswer,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Restore(#[from] RestoreError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A parsed reasoning response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningAnswer {
    pub reasoning_steps: Vec<String>,
    pub final_answer: String,
    pub raw_response: String,
}

/// The knowledge gap of one round, as sub-questions. An empty list means
/// the round found nothing missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubQuestionSet {
    pub questions: Vec<String>,
    pub round: u32,
}

impl SubQuestionSet {
    pub fn empty(round: u32) -> Self {
        Self {
            questions: Vec::new(),
            round,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichmentCounts {
    pub entities_added: usize,
    pub relations_added: usize,
}

/// Everything one round did, recorded after its enrichment step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: u32,
    pub paths: usize,
    pub triples: usize,
    pub augmented_triples: usize,
    pub answer: ReasoningAnswer,
    pub sub_questions: SubQuestionSet,
    pub enrichment: EnrichmentCounts,
    pub stats: GraphStats,
}

/// A completed run: the last round's answer plus the full trace.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub answer: ReasoningAnswer,
    pub traces: Vec<RoundTrace>,
}

/// An aborted run, with whatever rounds completed before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: LoopError,
    pub traces: Vec<RoundTrace>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "reasoning loop failed after {} round(s): {}",
            self.traces.len(),
            self.error
        )
    }
}

impl std::error::Error for RunFailure {}

/// Backends and templates the loop runs against.
pub struct LoopContext<'a> {
    pub chat: &'a dyn ChatBackend,
    pub embedder: &'a dyn Embedder,
    pub scorer: &'a dyn SubgraphScorer,
    pub templates: &'a TemplateSet,
    pub config: &'a RunConfig,
}

fn bindings(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// `<head | predicate | tail>` lines, one per triple.
pub fn triples_block(augmented: &[AugmentedTriple]) -> String {
    augmented
        .iter()
        .map(|t| format!("<{} | {} | {}>", t.head_name, t.predicate, t.tail_name))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The contextual-information block fed to the reasoning and gap
/// prompts: a `Triples:` section followed by deduplicated context
/// sentences under `Related Text:`.
pub fn context_block(augmented: &[AugmentedTriple]) -> String {
    let mut out = String::from("Triples:\n");
    out.push_str(&triples_block(augmented));
    if !augmented.is_empty() {
        out.push('\n');
    }
    out.push_str("Related Text:");
    let mut seen = std::collections::BTreeSet::new();
    for t in augmented {
        if seen.insert(t.context_sentence.as_str()) {
            out.push('\n');
            out.push_str(&t.context_sentence);
        }
    }
    out
}

/// Render the reasoning prompt for one round.
pub fn format_input(
    templates: &TemplateSet,
    question: &str,
    augmented: &[AugmentedTriple],
) -> Result<String, GatewayError> {
    render(
        &templates.reasoning,
        &bindings(&[("text", &context_block(augmented)), ("question", question)]),
    )
}

fn strip_step_marker(line: &str) -> Option<&str> {
    let trimmed = line.trim_start();
    let digits = trimmed.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    let rest = &trimmed[digits..];
    rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))
}

/// Extract the numbered reasoning steps and the phrase under the
/// `Final Answer:` heading, tolerating markdown around the headings.
pub fn parse_answer(raw: &str) -> Result<ReasoningAnswer, LoopError> {
    let lines: Vec<&str> = raw.lines().collect();
    let mut heading = None;
    for (i, line) in lines.iter().enumerate() {
        let stripped = line
            .trim()
            .trim_start_matches(['#', '*', '-', '>', ' '])
            .trim();
        if stripped.to_lowercase().starts_with("final answer") {
            let remainder = stripped
                .split_once(':')
                .map(|(_, rest)| rest)
                .unwrap_or("");
            heading = Some((i, remainder));
            break;
        }
    }
    let Some((idx, remainder)) = heading else {
        return Err(LoopError::MissingFinalAnswer);
    };
    let mut parts: Vec<&str> = Vec::new();
    if !remainder.trim().is_empty() {
        parts.push(remainder);
    }
    parts.extend(&lines[idx + 1..]);
    let final_answer = parts
        .join("\n")
        .trim()
        .trim_matches('*')
        .trim()
        .to_string();
    if final_answer.is_empty() {
        return Err(LoopError::MissingFinalAnswer);
    }
    let reasoning_steps = lines[..idx]
        .iter()
        .filter_map(|l| strip_step_marker(l))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    Ok(ReasoningAnswer {
        reasoning_steps,
        final_answer,
        raw_response: raw.to_string(),
    })
}

/// Ask the model what the current context is missing; one sub-question
/// per non-empty output line. The prompt template carries no slot for
/// the answer, so only question and context are rendered.
pub fn identify_missing(
    chat: &dyn ChatBackend,
    templates: &TemplateSet,
    question: &str,
    _answer: &ReasoningAnswer,
    augmented: &[AugmentedTriple],
    round: u32,
) -> Result<SubQuestionSet, LoopError> {
    let prompt = render(
        &templates.missing_knowledge,
        &bindings(&[
            ("context_info", &context_block(augmented)),
            ("question", question),
        ]),
    )?;
    let response = chat.complete(&prompt)?;
    let questions = response
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    Ok(SubQuestionSet { questions, round })
}

/// `title | sentence` lines for the retrieved chunks, the format the
/// enrichment prompt's example shows.
fn related_sentences_block(corpus: &Corpus, chunk_ids: &[String]) -> String {
    let splitter = crate::corpus::SentenceSplitter::default();
    let mut lines = Vec::new();
    for chunk_id in chunk_ids {
        let Some(chunk) = corpus.chunk(chunk_id) else {
            continue;
        };
        let title = corpus.title_of(&chunk.doc_id).unwrap_or(&chunk.doc_id);
        for sentence in splitter.split(chunk) {
            lines.push(format!("{title} | {}", sentence.text));
        }
    }
    lines.join("\n")
}

/// Enrich the graph from one round's sub-questions: retrieve top-k
/// chunks per sub-question, run the enrichment prompt, merge extracted
/// triples. Failures on one sub-question are logged and skipped; the
/// loop must not abort on a single bad extraction.
#[allow(clippy::too_many_arguments)]
pub fn enrich(
    graph: &mut KnowledgeGraph,
    corpus: &Corpus,
    index: &DenseIndex,
    chat: &dyn ChatBackend,
    embedder: &dyn Embedder,
    templates: &TemplateSet,
    sub_questions: &SubQuestionSet,
    existing: &[AugmentedTriple],
    k: usize,
    threshold: f64,
) -> EnrichmentCounts {
    let mut totals = EnrichmentCounts {
        entities_added: 0,
        relations_added: 0,
    };
    let existing_block = triples_block(existing);
    for question in &sub_questions.questions {
        let attempt = (|| -> Result<(usize, usize), LoopError> {
            let ranked = index.retrieve(embedder, question, k)?;
            if ranked.is_empty() {
                return Ok((0, 0));
            }
            let chunk_ids: Vec<String> = ranked.into_iter().map(|r| r.chunk_id).collect();
            let prompt = render(
                &templates.kg_enrichment,
                &bindings(&[
                    ("context_info", &existing_block),
                    ("sub_questions", question),
                    ("context", &related_sentences_block(corpus, &chunk_ids)),
                ]),
            )?;
            let response = chat.complete(&prompt)?;
            let (batch, errors, _) =
                parse_and_validate(&response, &chunk_ids[0], ValidationMode::Lenient);
            if !errors.is_empty() {
                log::debug!(
                    "enrichment extraction for {question:?}: {} violation(s) dropped",
                    errors.len()
                );
            }
            Ok(graph.merge_extraction(&batch, threshold)?)
        })();
        match attempt {
            Ok((e, r)) => {
                totals.entities_added += e;
                totals.relations_added += r;
            }
            Err(err) => log::warn!("enrichment for sub-question {question:?} failed: {err}"),
        }
    }
    totals
}

/// Restore all unique triples of a subgraph; triples whose source chunks
/// are not in the corpus (enrichment can add such) fall back to their
/// stored evidence quote as the context sentence.
fn restore_with_fallback(
    graph: &KnowledgeGraph,
    corpus: &Corpus,
    embedder: &dyn Embedder,
    subgraph: &crate::retrieval::Subgraph,
) -> Result<Vec<AugmentedTriple>, LoopError> {
    let restorer = ContextRestorer::new(graph, corpus, embedder);
    let mut out = Vec::new();
    for triple in subgraph.unique_triples() {
        match restorer.restore_context(&triple) {
            Ok(augmented) => out.push(augmented),
            Err(RestoreError::EmptyCandidateSet { .. }) => {
                let head = graph.entity(triple.head).expect("endpoint resolves");
                let tail = graph.entity(triple.tail).expect("endpoint resolves");
                let relation = graph
                    .relations()
                    .iter()
                    .find(|r| {
                        r.head == triple.head
                            && r.tail == triple.tail
                            && r.predicate == triple.predicate
                    })
                    .expect("triple came from the snapshot");
                let template = verbalize(&head.name, &triple.predicate, &tail.name);
                let sentence = if relation.evidence.is_empty() {
                    template.clone()
                } else {
                    relation.evidence.clone()
                };
                let similarity = {
                    let t = embedder.embed_one(&template).map_err(RetrievalError::from)?;
                    let s = embedder.embed_one(&sentence).map_err(RetrievalError::from)?;
                    crate::retrieval::cosine(&t, &s).unwrap_or(0.0)
                };
                let provenance = relation
                    .sources
                    .iter()
                    .next()
                    .cloned()
                    .unwrap_or_default();
                out.push(AugmentedTriple {
                    head_name: head.name.clone(),
                    predicate: triple.predicate.clone(),
                    tail_name: tail.name.clone(),
                    context_sentence: sentence,
                    similarity,
                    sentence_provenance: provenance,
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Run the full cycle for one question. Terminates when the sub-question
/// set empties, when enrichment stalls for two consecutive rounds, or
/// after `i_max` rounds.
pub fn run_query(
    ctx: &LoopContext<'_>,
    question: &str,
    graph: &mut KnowledgeGraph,
    corpus: &Corpus,
    index: &DenseIndex,
) -> Result<RunOutcome, Box<RunFailure>> {
    let mut traces: Vec<RoundTrace> = Vec::new();
    let mut stalled_rounds = 0u32;
    let config = ctx.config;

    macro_rules! try_or_abort {
        ($expr:expr) => {
            match $expr {
                Ok(v) => v,
                Err(e) => {
                    return Err(Box::new(RunFailure {
                        error: e.into(),
                        traces,
                    }))
                }
            }
        };
    }

    for round in 0..config.i_max {
        // forward flow: G -> G' -> answer
        let seeds = try_or_abort!(seed_entities(graph, question, config.seed_k, ctx.embedder));
        let subgraph = try_or_abort!(beam_search_subgraph(
            graph,
            question,
            &seeds,
            config.beam_width,
            config.max_depth,
            ctx.scorer,
        ));
        let augmented = try_or_abort!(restore_with_fallback(graph, corpus, ctx.embedder, &subgraph));

        let prompt = try_or_abort!(format_input(ctx.templates, question, &augmented));
        let raw = try_or_abort!(ctx.chat.complete(&prompt));
        let answer = match parse_answer(&raw) {
            Ok(a) => a,
            Err(_) if !ctx.chat.deterministic() => {
                let retried = try_or_abort!(ctx.chat.complete(&prompt));
                try_or_abort!(parse_answer(&retried))
            }
            Err(e) => return Err(Box::new(RunFailure { error: e, traces })),
        };

        // feedback flow: answer -> knowledge increment -> G
        let sub_questions = match config.feedback_mode {
            FeedbackMode::QueryDriven => try_or_abort!(identify_missing(
                ctx.chat,
                ctx.templates,
                question,
                &answer,
                &augmented,
                round,
            )),
            FeedbackMode::AnswerDriven => SubQuestionSet::empty(round),
        };

        graph.set_round(round + 1);
        let enrichment = match config.feedback_mode {
            FeedbackMode::QueryDriven => {
                if sub_questions.is_empty() {
                    EnrichmentCounts {
                        entities_added: 0,
                        relations_added: 0,
                    }
                } else {
                    enrich(
                        graph,
                        corpus,
                        index,
                        ctx.chat,
                        ctx.embedder,
                        ctx.templates,
                        &sub_questions,
                        &augmented,
                        config.enrich_k,
                        config.dedup_threshold,
                    )
                }
            }
            FeedbackMode::AnswerDriven => {
                enrich_from_answer(graph, ctx, &answer, round, config.dedup_threshold)
            }
        };

        traces.push(RoundTrace {
            round,
            paths: subgraph.paths.len(),
            triples: subgraph.unique_triples().len(),
            augmented_triples: augmented.len(),
            answer: answer.clone(),
            sub_questions: sub_questions.clone(),
            enrichment,
            stats: graph.snapshot_stats(),
        });

        let nothing_added = enrichment.entities_added == 0 && enrichment.relations_added == 0;
        match config.feedback_mode {
            FeedbackMode::QueryDriven => {
                if sub_questions.is_empty() {
                    break;
                }
                if nothing_added {
                    stalled_rounds += 1;
                    if stalled_rounds >= 2 {
                        log::info!("converged: enrichment stalled for 2 consecutive rounds");
                        break;
                    }
                } else {
                    stalled_rounds = 0;
                }
            }
            FeedbackMode::AnswerDriven => {
                if nothing_added {
                    break;
                }
            }
        }
    }

    let answer = traces
        .last()
        .map(|t| t.answer.clone())
        .expect("i_max >= 1 guarantees one round");
    Ok(RunOutcome { answer, traces })
}

/// Answer-driven feedback: run the extraction prompt over the raw answer
/// text and merge whatever parses. Failures log and count as an empty
/// increment.
fn enrich_from_answer(
    graph: &mut KnowledgeGraph,
    ctx: &LoopContext<'_>,
    answer: &ReasoningAnswer,
    round: u32,
    threshold: f64,
) -> EnrichmentCounts {
    let attempt = (|| -> Result<(usize, usize), LoopError> {
        let prompt = render(
            &ctx.templates.triples_extraction,
            &bindings(&[("input_text", answer.raw_response.as_str())]),
        )?;
        let response = ctx.chat.complete(&prompt)?;
        let source = format!("answer#round{round}");
        let (batch, _, _) = parse_and_validate(&response, &source, ValidationMode::Lenient);
        Ok(graph.merge_extraction(&batch, threshold)?)
    })();
    match attempt {
        Ok((entities_added, relations_added)) => EnrichmentCounts {
            entities_added,
            relations_added,
        },
        Err(err) => {
            log::warn!("answer-driven enrichment failed: {err}");
            EnrichmentCounts {
                entities_added: 0,
                relations_added: 0,
            }
        }
    }
}

/// Write traces as JSON Lines, one round per line.
pub fn write_traces(traces: &[RoundTrace]) -> String {
    let mut out = String::new();
    for trace in traces {
        out.push_str(&serde_json::to_string(trace).expect("trace serializes"));
        out.push('\n');
    }
    out
}

/// Read a trace file produced by [`write_traces`].
pub fn read_traces(reader: impl BufRead) -> Result<Vec<RoundTrace>, serde_json::Error> {
    let mut traces = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(serde_json::Error::io)?;
        if line.trim().is_empty() {
            continue;
        }
        traces.push(serde_json::from_str(&line)?);
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ScriptedChat, ScriptedRule};

    fn aug(h: &str, p: &str, t: &str, sentence: &str) -> AugmentedTriple {
        AugmentedTriple {
            head_name: h.into(),
            predicate: p.into(),
            tail_name: t.into(),
            context_sentence: sentence.into(),
            similarity: 0.5,
            sentence_provenance: "c1".into(),
        }
    }

    #[test]
    fn format_input_matches_the_example_layout() {
        let templates = TemplateSet::builtin();
        let augmented = vec![
            aug("Inception", "directed by", "Christopher Nolan", "Christopher Nolan directed both \"Inception\" and \"Interstellar.\""),
            aug("Interstellar", "directed by", "Christopher Nolan", "Christopher Nolan directed both \"Inception\" and \"Interstellar.\""),
            aug("Inception", "released in", "2010", "\"Inception\" was released in 2010."),
        ];
        let question = "Which director of a 2010 sci-fi movie also directed a film released in 2014?";
        let prompt = format_input(&templates, question, &augmented).unwrap();
        let expected_block = "Triples:\n\
            <Inception | directed by | Christopher Nolan>\n\
            <Interstellar | directed by | Christopher Nolan>\n\
            <Inception | released in | 2010>\n\
            Related Text:\n\
            Christopher Nolan directed both \"Inception\" and \"Interstellar.\"\n\
            \"Inception\" was released in 2010.";
        assert!(prompt.contains(expected_block), "prompt block mismatch:\n{prompt}");
    }

    #[test]
    fn question_appears_verbatim_exactly_once() {
        // a question that does not collide with the template's examples
        let templates = TemplateSet::builtin();
        let question = "Who proposed the weave protocol in 2019?";
        let prompt = format_input(&templates, question, &[]).unwrap();
        assert_eq!(prompt.matches(question).count(), 1);
    }

    #[test]
    fn format_input_with_no_triples_renders_empty_sections() {
        let templates = TemplateSet::builtin();
        let prompt = format_input(&templates, "q?", &[]).unwrap();
        assert!(prompt.contains("Triples:\nRelated Text:"));
    }

    #[test]
    fn context_block_dedupes_sentences() {
        let augmented = vec![
            aug("A", "r", "B", "Shared sentence."),
            aug("B", "s", "C", "Shared sentence."),
        ];
        let block = context_block(&augmented);
        assert_eq!(block.matches("Shared sentence.").count(), 1);
    }

    #[test]
    fn parse_answer_extracts_steps_and_final_phrase() {
        let raw = "Reasoning Process:  \n\
            1. **Identify 2010 sci-fi movies in context**:  \n\
            \u{20}  - From context -> Inception qualifies (released in 2010, genre science fiction).  \n\
            2. **Find the director of Inception from context**:  \n\
            \u{20}  - Context states director is Christopher Nolan.  \n\
            3. **Check context for 2014 films directed by Christopher Nolan**:  \n\
            \u{20}  - Check 2014 films in context: Interstellar (2014, directed by Christopher Nolan).\n\
            Final Answer:  \n\
            Christopher Nolan   ";
        let answer = parse_answer(raw).unwrap();
        assert_eq!(answer.final_answer, "Christopher Nolan");
        assert_eq!(answer.reasoning_steps.len(), 3);
        assert!(answer.reasoning_steps[0].starts_with("**Identify"));
        assert_eq!(answer.raw_response, raw);
    }

    #[test]
    fn parse_answer_tolerates_markdown_headings() {
        for raw in [
            "### Final Answer:\nParis",
            "**Final Answer:** Paris",
            "- Final Answer: Paris",
            "FINAL ANSWER:\n  Paris  ",
        ] {
            assert_eq!(parse_answer(raw).unwrap().final_answer, "Paris", "case: {raw}");
        }
    }

    #[test]
    fn missing_or_empty_final_answer_is_an_error() {
        assert!(matches!(
            parse_answer("no heading at all"),
            Err(LoopError::MissingFinalAnswer)
        ));
        assert!(matches!(
            parse_answer("Reasoning\nFinal Answer:\n   \n"),
            Err(LoopError::MissingFinalAnswer)
        ));
    }

    #[test]
    fn identify_missing_parses_one_question_per_line() {
        let templates = TemplateSet::builtin();
        let question = "For what did Albert Einstein receive the Nobel Prize in Physics?";
        let response = "What was the 1921 Nobel Prize in Physics awarded for?\n\
            What was the official reason or citation for awarding Albert Einstein the 1921 Nobel Prize in Physics?\n\
            Who were the other nominees for the 1921 Nobel Prize in Physics?\n\
            What were the criteria for awarding the Nobel Prize in Physics in 1921?";
        let chat = ScriptedChat::new(vec![ScriptedRule::new(vec![question], response)]);
        let answer = ReasoningAnswer {
            reasoning_steps: vec![],
            final_answer: "the photoelectric effect".into(),
            raw_response: String::new(),
        };
        let augmented = vec![aug(
            "Albert Einstein",
            "won Nobel Prize in",
            "1921",
            "Einstein won the Nobel Prize in 1921.",
        )];
        let set = identify_missing(&chat, &templates, question, &answer, &augmented, 0).unwrap();
        assert_eq!(set.questions.len(), 4);
        assert_eq!(
            set.questions[0],
            "What was the 1921 Nobel Prize in Physics awarded for?"
        );
        assert_eq!(set.round, 0);
    }

    #[test]
    fn blank_identify_output_is_convergence() {
        let templates = TemplateSet::builtin();
        let chat = ScriptedChat::new(vec![ScriptedRule::new(vec!["--Goal--"], "   \n  \n")]);
        let answer = ReasoningAnswer {
            reasoning_steps: vec![],
            final_answer: "x".into(),
            raw_response: String::new(),
        };
        let set = identify_missing(&chat, &templates, "q?", &answer, &[], 3).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.round, 3);
    }

    #[test]
    fn sub_question_lines_are_trimmed() {
        let templates = TemplateSet::builtin();
        let chat = ScriptedChat::new(vec![ScriptedRule::new(
            vec!["--Goal--"],
            "   Question one?   \n\n\t Question two? \n",
        )]);
        let answer = ReasoningAnswer {
            reasoning_steps: vec![],
            final_answer: "x".into(),
            raw_response: String::new(),
        };
        let set = identify_missing(&chat, &templates, "q?", &answer, &[], 0).unwrap();
        assert_eq!(set.questions, vec!["Question one?", "Question two?"]);
    }

    #[test]
    fn enrich_merges_extraction_for_each_sub_question() {
        use crate::corpus::{Corpus, Document};
        use crate::extraction::RawEntityRecord;
        use crate::gateway::MockEmbedder;
        use crate::retrieval::DenseIndex;

        let corpus = Corpus::build(
            vec![Document::new(
                "nobel",
                "Nobel Prizes",
                "Marie Curie shared the 1903 Nobel Prize in Physics with Pierre Curie and Henri Becquerel.",
            )],
            512,
            64,
        )
        .unwrap();
        let mut graph = crate::graph::KnowledgeGraph::new();
        let marie = graph.upsert_entity(
            &RawEntityRecord {
                eid: "E1".into(),
                entity_type: "Person".into(),
                name: "Marie Curie".into(),
                description: "Physicist and chemist".into(),
            },
            "nobel#1",
        );
        let year = graph.upsert_entity(
            &RawEntityRecord {
                eid: "E2".into(),
                entity_type: "Year".into(),
                name: "1903".into(),
                description: String::new(),
            },
            "nobel#1",
        );
        graph
            .add_relation(marie, "won Nobel Prize in Physics", year, "", "nobel#1", 0.2)
            .unwrap();

        let sub_question = "Who did Marie Curie share the 1903 Nobel Prize in Physics with?";
        // the rule requires the "title | sentence" related-text line, so a
        // formatting regression makes the scripted backend miss
        let chat = ScriptedChat::new(vec![ScriptedRule::new(
            vec![
                sub_question,
                "<Marie Curie | won Nobel Prize in Physics | 1903>",
                "Nobel Prizes | Marie Curie shared the 1903 Nobel Prize",
            ],
            "Entities:\n\
             [entity | E1 | Person | \"Marie Curie\" | Physicist and chemist]\n\
             [entity | E2 | Person | \"Pierre Curie\" | Physicist]\n\
             [entity | E3 | Person | \"Henri Becquerel\" | Physicist]\n\
             Relations:\n\
             [relation | E1 | shared Nobel Prize with | E2 | \"shared the 1903 Nobel Prize in Physics with Pierre Curie\"]\n\
             [relation | E1 | shared Nobel Prize with | E3 | \"shared the 1903 Nobel Prize in Physics with Henri Becquerel\"]",
        )]);
        let embedder = MockEmbedder::new(42, 32);
        let index = DenseIndex::build(&corpus, &embedder, None).unwrap();
        let templates = TemplateSet::builtin();
        let existing = vec![aug(
            "Marie Curie",
            "won Nobel Prize in Physics",
            "1903",
            "Marie Curie won the 1903 prize.",
        )];
        let subq = SubQuestionSet {
            questions: vec![sub_question.to_string()],
            round: 0,
        };
        let counts = enrich(
            &mut graph, &corpus, &index, &chat, &embedder, &templates, &subq, &existing, 5, 0.2,
        );
        // Marie merges; Pierre and Henri are new, with both relations
        assert_eq!(counts.entities_added, 2);
        assert_eq!(counts.relations_added, 2);
        assert!(graph.entity_by_name("Pierre Curie").is_some());
        assert!(graph.entity_by_name("Henri Becquerel").is_some());

        // empty sub-question set leaves the graph untouched
        let before = graph.snapshot_stats();
        let counts = enrich(
            &mut graph,
            &corpus,
            &index,
            &chat,
            &embedder,
            &templates,
            &SubQuestionSet::empty(1),
            &existing,
            5,
            0.2,
        );
        assert_eq!((counts.entities_added, counts.relations_added), (0, 0));
        assert_eq!(graph.snapshot_stats(), before);
    }

    #[test]
    fn enrich_skips_failing_sub_questions() {
        use crate::corpus::{Corpus, Document};
        use crate::gateway::MockEmbedder;
        use crate::retrieval::DenseIndex;

        let corpus = Corpus::build(
            vec![Document::new("d", "D", "Some corpus text here.")],
            512,
            64,
        )
        .unwrap();
        let mut graph = crate::graph::KnowledgeGraph::new();
        // only the second sub-question has a scripted answer
        let chat = ScriptedChat::new(vec![ScriptedRule::new(
            vec!["second question"],
            "[entity | E1 | Fact | \"A\" | x]\n\
             [entity | E2 | Fact | \"B\" | y]\n\
             [relation | E1 | links | E2 | \"ev\"]",
        )]);
        let embedder = MockEmbedder::new(1, 16);
        let index = DenseIndex::build(&corpus, &embedder, None).unwrap();
        let templates = TemplateSet::builtin();
        let subq = SubQuestionSet {
            questions: vec!["first question".into(), "second question".into()],
            round: 0,
        };
        let counts = enrich(
            &mut graph, &corpus, &index, &chat, &embedder, &templates, &subq, &[], 5, 0.2,
        );
        assert_eq!(counts.entities_added, 2);
        assert_eq!(counts.relations_added, 1);
    }

    #[test]
    fn trace_jsonl_round_trips() {
        let trace = RoundTrace {
            round: 0,
            paths: 2,
            triples: 3,
            augmented_triples: 3,
            answer: ReasoningAnswer {
                reasoning_steps: vec!["step".into()],
                final_answer: "yes".into(),
                raw_response: "raw".into(),
            },
            sub_questions: SubQuestionSet {
                questions: vec!["q1?".into()],
                round: 0,
            },
            enrichment: EnrichmentCounts {
                entities_added: 1,
                relations_added: 2,
            },
            stats: GraphStats {
                round: 1,
                nodes: 5,
                edges: 4,
            },
        };
        let text = write_traces(std::slice::from_ref(&trace));
        let back = read_traces(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].stats, trace.stats);
        assert_eq!(back[0].answer, trace.answer);
    }
}
