//! Benchmark harness: neutral dataset loading, extractive-QA answer
//! normalization, Exact Match and token-level F1, and per-round metric
//! aggregation over replayed or live runs.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document};
use crate::pipeline::{Engine, PipelineError};
use crate::reasoning::RoundTrace;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset line {line}: {cause}")]
    Dataset { line: usize, cause: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// One benchmark question with its gold answers and retrieval corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QAExample {
    pub qid: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    pub context_docs: Vec<Document>,
}

#[derive(Deserialize)]
struct DatasetContext {
    #[serde(default)]
    title: String,
    text: String,
}

#[derive(Deserialize)]
struct DatasetLine {
    #[serde(default)]
    qid: Option<String>,
    question: String,
    answers: Vec<String>,
    #[serde(default)]
    contexts: Vec<DatasetContext>,
}

/// Load JSON Lines of `{qid?, question, answers, contexts:[{title,text}]}`.
pub fn load_dataset(reader: impl BufRead) -> Result<Vec<QAExample>, EvalError> {
    let mut examples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DatasetLine = serde_json::from_str(&line).map_err(|e| EvalError::Dataset {
            line: i + 1,
            cause: e.to_string(),
        })?;
        if parsed.answers.is_empty() {
            return Err(EvalError::Dataset {
                line: i + 1,
                cause: "gold answers must be non-empty".into(),
            });
        }
        let qid = parsed.qid.unwrap_or_else(|| format!("q{:05}", i));
        let context_docs = parsed
            .contexts
            .into_iter()
            .enumerate()
            .map(|(j, c)| Document::new(format!("{qid}-doc{j}"), c.title, c.text))
            .collect();
        examples.push(QAExample {
            qid,
            question: parsed.question,
            gold_answers: parsed.answers,
            context_docs,
        });
    }
    Ok(examples)
}

/// Extractive-QA normalization: lowercase, strip punctuation, drop the
/// articles a/an/the, collapse whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let no_punct: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    no_punct
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 1 iff the normalized prediction equals any normalized gold.
pub fn exact_match(pred: &str, golds: &[String]) -> u8 {
    let p = normalize_answer(pred);
    u8::from(golds.iter().any(|g| normalize_answer(g) == p))
}

fn token_counts(s: &str) -> BTreeMap<&str, usize> {
    let mut counts = BTreeMap::new();
    for token in s.split_whitespace() {
        *counts.entry(token).or_insert(0) += 1;
    }
    counts
}

fn f1_single(pred: &str, gold: &str) -> f64 {
    let p = normalize_answer(pred);
    let g = normalize_answer(gold);
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    let pc = token_counts(&p);
    let gc = token_counts(&g);
    let common: usize = pc
        .iter()
        .map(|(t, c)| c.min(gc.get(t).unwrap_or(&0)))
        .sum();
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pc.values().sum::<usize>() as f64;
    let recall = common as f64 / gc.values().sum::<usize>() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Max over golds of token-multiset F1 on normalized strings.
pub fn token_f1(pred: &str, golds: &[String]) -> f64 {
    golds
        .iter()
        .map(|g| f1_single(pred, g))
        .fold(0.0, f64::max)
}

/// Per-round aggregate row; a question answered at round r contributes
/// its round-r state to every later row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u32,
    pub nodes: f64,
    pub edges: f64,
    pub em: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleResult {
    pub qid: String,
    pub em: u8,
    pub f1: f64,
    pub rounds: usize,
    pub final_answer: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub em: f64,
    pub f1: f64,
    pub n: usize,
    pub per_round: Vec<RoundMetrics>,
    pub examples: Vec<ExampleResult>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV rows `round,nodes,edges,em,f1`, node/edge values averaged over
    /// examples.
    pub fn per_round_csv(&self) -> String {
        let mut out = String::from("round,nodes,edges,em,f1\n");
        for row in &self.per_round {
            out.push_str(&format!(
                "{},{},{},{:.4},{:.4}\n",
                row.round, row.nodes, row.edges, row.em, row.f1
            ));
        }
        out
    }
}

struct ExampleRun {
    result: ExampleResult,
    traces: Vec<RoundTrace>,
}

fn run_example(engine: &Engine, example: &QAExample) -> ExampleRun {
    let attempt = (|| -> Result<(String, Vec<RoundTrace>), String> {
        let corpus = Corpus::build(
            example.context_docs.clone(),
            engine.config().max_len,
            engine.config().overlap,
        )
        .map_err(|e| e.to_string())?;
        let (mut graph, _) = engine.build_graph(&corpus).map_err(|e| e.to_string())?;
        match engine.run_query(&example.question, &mut graph, &corpus) {
            Ok(outcome) => Ok((outcome.answer.final_answer, outcome.traces)),
            Err(failure) => Err(failure.to_string()),
        }
    })();
    match attempt {
        Ok((answer, traces)) => ExampleRun {
            result: ExampleResult {
                qid: example.qid.clone(),
                em: exact_match(&answer, &example.gold_answers),
                f1: token_f1(&answer, &example.gold_answers),
                rounds: traces.len(),
                final_answer: answer,
                error: None,
            },
            traces,
        },
        Err(cause) => ExampleRun {
            result: ExampleResult {
                qid: example.qid.clone(),
                em: 0,
                f1: 0.0,
                rounds: 0,
                final_answer: String::new(),
                error: Some(cause),
            },
            traces: Vec::new(),
        },
    }
}

fn aggregate(examples: &[QAExample], runs: Vec<ExampleRun>) -> MetricReport {
    let n = runs.len();
    let em = runs.iter().map(|r| r.result.em as f64).sum::<f64>() / n.max(1) as f64;
    let f1 = runs.iter().map(|r| r.result.f1).sum::<f64>() / n.max(1) as f64;

    let max_rounds = runs.iter().map(|r| r.traces.len()).max().unwrap_or(0);
    let mut per_round = Vec::new();
    for j in 0..max_rounds {
        let mut em_sum = 0.0;
        let mut f1_sum = 0.0;
        let mut nodes = 0.0;
        let mut edges = 0.0;
        for (run, example) in runs.iter().zip(examples) {
            if run.traces.is_empty() {
                continue;
            }
            let t = &run.traces[j.min(run.traces.len() - 1)];
            em_sum += exact_match(&t.answer.final_answer, &example.gold_answers) as f64;
            f1_sum += token_f1(&t.answer.final_answer, &example.gold_answers);
            nodes += t.stats.nodes as f64;
            edges += t.stats.edges as f64;
        }
        per_round.push(RoundMetrics {
            round: j as u32,
            nodes: nodes / n.max(1) as f64,
            edges: edges / n.max(1) as f64,
            em: em_sum / n.max(1) as f64,
            f1: f1_sum / n.max(1) as f64,
        });
    }
    MetricReport {
        em,
        f1,
        n,
        per_round,
        examples: runs.into_iter().map(|r| r.result).collect(),
    }
}

/// Run the engine over a (sampled) dataset and aggregate metrics.
/// Examples run in parallel against per-question graph copies unless the
/// config selects a single shared graph; aggregation is a deterministic
/// fold ordered by qid. Per-example traces go to `trace_dir` when given.
pub fn run_benchmark(
    dataset: &[QAExample],
    engine: &Engine,
    sample_size: usize,
    seed: u64,
    trace_dir: Option<&Path>,
) -> Result<MetricReport, EvalError> {
    let mut sampled: Vec<&QAExample> = if sample_size >= dataset.len() {
        dataset.iter().collect()
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, dataset.len(), sample_size)
            .into_iter()
            .map(|i| &dataset[i])
            .collect()
    };
    sampled.sort_by(|a, b| a.qid.cmp(&b.qid));
    let examples: Vec<QAExample> = sampled.into_iter().cloned().collect();

    let runs: Vec<ExampleRun> = if engine.config().shared_graph {
        run_shared(engine, &examples)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(engine.config().workers)
            .build()
            .expect("thread pool");
        pool.install(|| {
            examples
                .par_iter()
                .map(|example| run_example(engine, example))
                .collect()
        })
    };

    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir)?;
        for run in &runs {
            let path = dir.join(format!("{}.jsonl", run.result.qid));
            std::fs::write(path, crate::reasoning::write_traces(&run.traces))?;
        }
    }
    Ok(aggregate(&examples, runs))
}

/// Shared-graph mode: one graph built from the union corpus, queries run
/// sequentially and enrich it in place.
fn run_shared(engine: &Engine, examples: &[QAExample]) -> Result<Vec<ExampleRun>, EvalError> {
    let mut all_docs: Vec<Document> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for example in examples {
        for doc in &example.context_docs {
            if seen.insert(doc.doc_id.clone()) {
                all_docs.push(doc.clone());
            }
        }
    }
    let corpus = Corpus::build(all_docs, engine.config().max_len, engine.config().overlap)
        .map_err(PipelineError::from)?;
    let (mut graph, _) = engine.build_graph(&corpus)?;
    let index = engine.dense_index(&corpus)?;
    let mut runs = Vec::new();
    for example in examples {
        let run = match engine.run_query_with_index(&example.question, &mut graph, &corpus, &index)
        {
            Ok(outcome) => ExampleRun {
                result: ExampleResult {
                    qid: example.qid.clone(),
                    em: exact_match(&outcome.answer.final_answer, &example.gold_answers),
                    f1: token_f1(&outcome.answer.final_answer, &example.gold_answers),
                    rounds: outcome.traces.len(),
                    final_answer: outcome.answer.final_answer,
                    error: None,
                },
                traces: outcome.traces,
            },
            Err(failure) => ExampleRun {
                result: ExampleResult {
                    qid: example.qid.clone(),
                    em: 0,
                    f1: 0.0,
                    rounds: failure.traces.len(),
                    final_answer: String::new(),
                    error: Some(failure.to_string()),
                },
                traces: failure.traces,
            },
        };
        runs.push(run);
    }
    Ok(runs)
}
