//! Regenerates the bundled offline fixtures: a small five-document
//! corpus plus a replay fixture covering `build-kg` and one full `query`
//! run at default settings. The scripted backend answers each prompt the
//! pipeline renders; the recorder keys every exchange by prompt hash so
//! the CLI can replay the identical run.
//!
//! Usage: cargo run -p tcrqf-core --example gen_fixtures -- [out_dir]

use std::sync::Arc;

use tcrqf_core::config::RunConfig;
use tcrqf_core::corpus::Corpus;
use tcrqf_core::gateway::{MockEmbedder, RecordingChat, ScriptedChat, ScriptedRule};
use tcrqf_core::pipeline::Engine;

const QUESTION: &str =
    "Which director of a 2010 sci-fi movie also directed a film released in 2014?";

const DOCS: &[(&str, &str, &str)] = &[
    (
        "inception",
        "Inception",
        "Inception is a 2010 science fiction film about dream infiltration. \
         Christopher Nolan directed Inception.",
    ),
    (
        "interstellar",
        "Interstellar",
        "Interstellar is an epic film about space travel. \
         Christopher Nolan directed Interstellar. \
         Interstellar was released in 2014.",
    ),
    (
        "marie-curie",
        "Marie Curie",
        "Marie Curie was a physicist and chemist. \
         Marie Curie shared the 1903 Nobel Prize in Physics with Pierre Curie and Henri Becquerel.",
    ),
    (
        "einstein",
        "Albert Einstein",
        "Albert Einstein was born in Ulm on 14 March 1879. \
         Albert Einstein won the Nobel Prize in Physics in 1921.",
    ),
    (
        "moon",
        "The Moon",
        "The Moon orbits the Earth. The Earth is part of the Solar System.",
    ),
];

const EXTRACTION_MARK: &str = "--Objective--";
const REASONING_MARK: &str = "Given a question and retrieved knowledge graph triplets";
const MISSING_MARK: &str = "Given the provided contextual information and the question";
const ENRICH_MARK: &str = "Existing Triples, Sub-questions, and Related Sentences";

const ENRICHED_TRIPLE: &str = "<Interstellar | released in | 2014>";
const SUB_QUESTION: &str = "When was the film Interstellar released?";

fn extraction_rules() -> Vec<ScriptedRule> {
    // The Interstellar extraction deliberately misses the release year;
    // the feedback round recovers it from the source text.
    let batches = [
        (
            "dream infiltration",
            "Entities:\n\
             [entity | E1 | Film | \"Inception\" | 2010 science fiction film about dream infiltration]\n\
             [entity | E2 | Person | \"Christopher Nolan\" | Film director]\n\
             [entity | E3 | Year | \"2010\" | Release year of Inception]\n\
             Relations:\n\
             [relation | E1 | directed by | E2 | \"Christopher Nolan directed Inception\"]\n\
             [relation | E1 | released in | E3 | \"Inception is a 2010 science fiction film\"]",
        ),
        (
            "epic film about space travel",
            "Entities:\n\
             [entity | E1 | Film | \"Interstellar\" | Epic film about space travel]\n\
             [entity | E2 | Person | \"Christopher Nolan\" | Film director]\n\
             Relations:\n\
             [relation | E1 | directed by | E2 | \"Christopher Nolan directed Interstellar\"]",
        ),
        (
            "physicist and chemist",
            "Entities:\n\
             [entity | E1 | Person | \"Marie Curie\" | Physicist and chemist]\n\
             [entity | E2 | Person | \"Pierre Curie\" | Physicist]\n\
             [entity | E3 | Person | \"Henri Becquerel\" | Physicist]\n\
             Relations:\n\
             [relation | E1 | shared Nobel Prize with | E2 | \"shared the 1903 Nobel Prize in Physics with Pierre Curie\"]\n\
             [relation | E1 | shared Nobel Prize with | E3 | \"shared the 1903 Nobel Prize in Physics with Henri Becquerel\"]",
        ),
        (
            "born in Ulm",
            "Entities:\n\
             [entity | E1 | Person | \"Albert Einstein\" | Theoretical physicist]\n\
             [entity | E2 | Location | \"Ulm\" | City in Germany]\n\
             [entity | E3 | Year | \"1921\" | Nobel Prize year]\n\
             Relations:\n\
             [relation | E1 | born in | E2 | \"Albert Einstein was born in Ulm\"]\n\
             [relation | E1 | won Nobel Prize in | E3 | \"won the Nobel Prize in Physics in 1921\"]",
        ),
        (
            "Moon orbits the Earth",
            "Entities:\n\
             [entity | E1 | Celestial Body | \"The Moon\" | Natural satellite of Earth]\n\
             [entity | E2 | Planet | \"Earth\" | Third planet of the Solar System]\n\
             [entity | E3 | System | \"Solar System\" | Planetary system of the Sun]\n\
             Relations:\n\
             [relation | E1 | orbits | E2 | \"The Moon orbits the Earth\"]\n\
             [relation | E2 | part of | E3 | \"The Earth is part of the Solar System\"]",
        ),
    ];
    batches
        .into_iter()
        .map(|(marker, batch)| ScriptedRule::new(vec![EXTRACTION_MARK, marker], batch))
        .collect()
}

fn scripted_rules() -> Vec<ScriptedRule> {
    let mut rules = extraction_rules();
    // enrichment for the round-0 sub-question
    rules.push(ScriptedRule::new(
        vec![ENRICH_MARK, SUB_QUESTION],
        "Entities:\n\
         [entity | E1 | Film | \"Interstellar\" | Epic film about space travel]\n\
         [entity | E2 | Year | \"2014\" | Release year of Interstellar]\n\
         Relations:\n\
         [relation | E1 | released in | E2 | \"Interstellar was released in 2014\"]",
    ));
    // round 1: the restored subgraph now carries the release year
    rules.push(ScriptedRule::new(
        vec![REASONING_MARK, QUESTION, ENRICHED_TRIPLE],
        "Reasoning Process:\n\
         1. **Identify 2010 sci-fi movies in context**:\n\
         \u{20}  - From context -> Inception qualifies (released in 2010, science fiction).\n\
         2. **Find the director of Inception from context**:\n\
         \u{20}  - Context states director is Christopher Nolan.\n\
         3. **Check context for 2014 films directed by Christopher Nolan**:\n\
         \u{20}  - Interstellar was released in 2014 and directed by Christopher Nolan.\n\
         Final Answer:\n\
         Christopher Nolan",
    ));
    // round 0: the release year is still missing
    rules.push(ScriptedRule::new(
        vec![REASONING_MARK, QUESTION],
        "Reasoning Process:\n\
         1. **Identify 2010 sci-fi movies in context**:\n\
         \u{20}  - From context -> Inception qualifies (released in 2010, science fiction).\n\
         2. **Find the director of Inception from context**:\n\
         \u{20}  - Context states director is Christopher Nolan.\n\
         3. **Check context for films released in 2014**:\n\
         \u{20}  - No release year for another Christopher Nolan film is in context.\n\
         Final Answer:\n\
         Insufficient information",
    ));
    rules.push(ScriptedRule::new(
        vec![MISSING_MARK, ENRICHED_TRIPLE],
        "",
    ));
    rules.push(ScriptedRule::new(vec![MISSING_MARK, QUESTION], SUB_QUESTION));
    rules
}

fn corpus_jsonl() -> String {
    let mut out = String::new();
    for (id, title, text) in DOCS {
        out.push_str(
            &serde_json::to_string(&serde_json::json!({
                "id": id,
                "title": title,
                "text": text,
            }))
            .unwrap(),
        );
        out.push('\n');
    }
    out
}

fn main() {
    let out_dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fixtures".to_string());
    let out_dir = std::path::PathBuf::from(out_dir);
    std::fs::create_dir_all(&out_dir).expect("create fixture dir");

    let corpus_text = corpus_jsonl();
    let corpus = Corpus::from_jsonl(corpus_text.as_bytes(), 512, 64).expect("fixture corpus");

    let recorder = Arc::new(RecordingChat::new(
        ScriptedChat::new(scripted_rules()),
        "scripted-fixture",
    ));
    let config = RunConfig::default();
    let engine = Engine::with_backends(
        Box::new(recorder.clone()),
        Box::new(MockEmbedder::new(config.embed_seed, config.embed_dim)),
        config,
    );

    let (mut graph, report) = engine.build_graph(&corpus).expect("build graph");
    assert_eq!(report.failed_chunks, 0, "all extraction prompts must hit a rule");
    let outcome = engine
        .run_query(QUESTION, &mut graph, &corpus)
        .expect("query succeeds");

    assert_eq!(
        outcome.answer.final_answer, "Christopher Nolan",
        "scenario must converge on the right answer; got {:?}",
        outcome.answer.final_answer
    );
    assert_eq!(outcome.traces.len(), 2, "expected enrich round plus converge round");
    assert!(outcome.traces[0].enrichment.relations_added > 0);
    assert!(outcome.traces[1].sub_questions.is_empty());

    std::fs::write(out_dir.join("corpus.jsonl"), &corpus_text).expect("write corpus");
    let fixture = recorder.to_replay_jsonl().expect("functional prompt->response log");
    std::fs::write(out_dir.join("replay.jsonl"), fixture).expect("write replay fixture");

    println!("wrote {}", out_dir.join("corpus.jsonl").display());
    println!("wrote {}", out_dir.join("replay.jsonl").display());
    println!("question: {QUESTION}");
    println!("answer:   {}", outcome.answer.final_answer);
    println!(
        "rounds:   {} (graph {} nodes / {} edges)",
        outcome.traces.len(),
        graph.node_count(),
        graph.edge_count()
    );
}
