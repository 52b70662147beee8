//! Subcommand implementations. Input problems exit 2, pipeline failures
//! exit 3; both print a diagnostic to stderr.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::Path;

use tcrqf_core::config::RunConfig;
use tcrqf_core::corpus::Corpus;
use tcrqf_core::eval::{load_dataset, run_benchmark};
use tcrqf_core::graph::KnowledgeGraph;
use tcrqf_core::pipeline::Engine;
use tcrqf_core::reasoning::{read_traces, write_traces, RoundTrace};

use crate::args::{BuildKgArgs, EvalArgs, QueryArgs, StatsArgs};
use crate::CliError;

fn load_corpus(path: &Path, config: &RunConfig) -> Result<Corpus, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Input(format!("cannot read corpus {}: {e}", path.display())))?;
    Corpus::from_jsonl(BufReader::new(file), config.max_len, config.overlap)
        .map_err(|e| CliError::Input(format!("corpus {}: {e}", path.display())))
}

fn make_engine(config: RunConfig) -> Result<Engine, CliError> {
    Engine::from_config(config).map_err(|e| CliError::Pipeline(e.to_string()))
}

pub fn build_kg(args: &BuildKgArgs, config: RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus, &config)?;
    let engine = make_engine(config)?;
    let (graph, report) = engine
        .build_graph(&corpus)
        .map_err(|e| CliError::Pipeline(e.to_string()))?;
    std::fs::write(&args.out, graph.persist())
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", args.out.display())))?;
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(path, json)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    println!(
        "built graph: {} chunks, {} entities, {} relations ({} parse errors, {} failed chunks)",
        report.chunks, report.entities, report.relations, report.parse_errors, report.failed_chunks
    );
    Ok(())
}

pub fn query(args: &QueryArgs, config: RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus, &config)?;
    let graph_text = std::fs::read_to_string(&args.kg)
        .map_err(|e| CliError::Input(format!("cannot read graph {}: {e}", args.kg.display())))?;
    let mut graph = KnowledgeGraph::load(&graph_text)
        .map_err(|e| CliError::Input(format!("graph {}: {e}", args.kg.display())))?;
    let engine = make_engine(config)?;
    match engine.run_query(&args.question, &mut graph, &corpus) {
        Ok(outcome) => {
            std::fs::write(&args.trace, write_traces(&outcome.traces)).map_err(|e| {
                CliError::Input(format!("cannot write {}: {e}", args.trace.display()))
            })?;
            println!("{}", outcome.answer.final_answer);
            Ok(())
        }
        Err(failure) => {
            // keep the partial trace for diagnosis
            let _ = std::fs::write(&args.trace, write_traces(&failure.traces));
            Err(CliError::Pipeline(failure.to_string()))
        }
    }
}

pub fn eval(args: &EvalArgs, config: RunConfig) -> Result<(), CliError> {
    let file = std::fs::File::open(&args.dataset).map_err(|e| {
        CliError::Input(format!("cannot read dataset {}: {e}", args.dataset.display()))
    })?;
    let dataset = load_dataset(BufReader::new(file))
        .map_err(|e| CliError::Input(format!("dataset {}: {e}", args.dataset.display())))?;
    let engine = make_engine(config)?;
    let sample = args.sample.unwrap_or(dataset.len());
    let report = run_benchmark(&dataset, &engine, sample, args.seed, args.trace_dir.as_deref())
        .map_err(|e| CliError::Pipeline(e.to_string()))?;
    std::fs::write(&args.report, report.to_json())
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", args.report.display())))?;
    if let Some(path) = &args.per_round_csv {
        std::fs::write(path, report.per_round_csv())
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    println!("em={:.4} f1={:.4} n={}", report.em, report.f1, report.n);
    Ok(())
}

/// Round-indexed CSV over every trace file in a directory, with a final
/// `delta` row holding the cumulative increase from the first to the
/// last round. Node/edge values are means across trace files.
pub fn stats_csv(traces_per_file: &[Vec<RoundTrace>]) -> Option<String> {
    let mut by_round: BTreeMap<u32, (f64, f64, usize)> = BTreeMap::new();
    for traces in traces_per_file {
        for trace in traces {
            let entry = by_round.entry(trace.round).or_insert((0.0, 0.0, 0));
            entry.0 += trace.stats.nodes as f64;
            entry.1 += trace.stats.edges as f64;
            entry.2 += 1;
        }
    }
    if by_round.is_empty() {
        return None;
    }
    let rows: Vec<(u32, f64, f64)> = by_round
        .into_iter()
        .map(|(round, (nodes, edges, n))| (round, nodes / n as f64, edges / n as f64))
        .collect();
    let mut out = String::from("round,nodes,edges\n");
    for (round, nodes, edges) in &rows {
        out.push_str(&format!("{round},{nodes},{edges}\n"));
    }
    let first = rows.first().expect("non-empty");
    let last = rows.last().expect("non-empty");
    out.push_str(&format!(
        "delta,{},{}\n",
        last.1 - first.1,
        last.2 - first.2
    ));
    Some(out)
}

pub fn stats(args: &StatsArgs) -> Result<(), CliError> {
    let entries = std::fs::read_dir(&args.trace_dir).map_err(|e| {
        CliError::Input(format!(
            "cannot read trace dir {}: {e}",
            args.trace_dir.display()
        ))
    })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    paths.sort();
    let mut traces_per_file = Vec::new();
    for path in paths {
        let file = std::fs::File::open(&path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let traces = read_traces(BufReader::new(file))
            .map_err(|e| CliError::Input(format!("trace {}: {e}", path.display())))?;
        if !traces.is_empty() {
            traces_per_file.push(traces);
        }
    }
    match stats_csv(&traces_per_file) {
        Some(csv) => {
            print!("{csv}");
            Ok(())
        }
        None => Err(CliError::Input(format!(
            "no traces found in {}",
            args.trace_dir.display()
        ))),
    }
}
