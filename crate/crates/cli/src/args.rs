//! Command-line surface. Global flags override the config file, which
//! overrides built-in defaults; secrets come only from the environment.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tcrqf_core::config::{EmbedderKind, FeedbackMode, RunConfig, ScorerKind, Transport};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "tcrqf", version, about = "GraphRAG engine with triple context restoration and query-driven feedback")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: ConfigOverrides,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeedbackModeArg {
    QueryDriven,
    AnswerDriven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransportArg {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderArg {
    Mock,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerArg {
    Embedding,
    Llm,
}

/// Optional overrides for every `RunConfig` field.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigOverrides {
    /// Flat TOML config file mirroring the run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    pub max_len: Option<usize>,

    #[arg(long, global = true)]
    pub overlap: Option<usize>,

    #[arg(long, global = true)]
    pub beam_width: Option<usize>,

    #[arg(long, global = true)]
    pub max_depth: Option<usize>,

    #[arg(long, global = true)]
    pub seed_k: Option<usize>,

    #[arg(long, global = true)]
    pub dedup_threshold: Option<f64>,

    #[arg(long, global = true)]
    pub enrich_k: Option<usize>,

    #[arg(long, global = true)]
    pub i_max: Option<u32>,

    #[arg(long, global = true, value_enum)]
    pub feedback_mode: Option<FeedbackModeArg>,

    #[arg(long, global = true, value_enum)]
    pub transport: Option<TransportArg>,

    /// Replay fixture (JSON Lines of {"hash","response"}).
    #[arg(long, global = true)]
    pub replay: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub embedder: Option<EmbedderArg>,

    #[arg(long, global = true)]
    pub embed_dim: Option<usize>,

    #[arg(long, global = true)]
    pub embed_seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub scorer: Option<ScorerArg>,

    /// Directory for on-disk embedding caches.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,

    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Evaluate against one shared graph instead of per-question copies.
    #[arg(long, global = true)]
    pub shared_graph: bool,
}

impl ConfigOverrides {
    /// defaults <- config file <- flags, then validate.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Input(format!("cannot read config {}: {e}", path.display()))
                })?;
                toml::from_str(&text).map_err(|e| {
                    CliError::Input(format!("invalid config {}: {e}", path.display()))
                })?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.max_len {
            config.max_len = v;
        }
        if let Some(v) = self.overlap {
            config.overlap = v;
        }
        if let Some(v) = self.beam_width {
            config.beam_width = v;
        }
        if let Some(v) = self.max_depth {
            config.max_depth = v;
        }
        if let Some(v) = self.seed_k {
            config.seed_k = v;
        }
        if let Some(v) = self.dedup_threshold {
            config.dedup_threshold = v;
        }
        if let Some(v) = self.enrich_k {
            config.enrich_k = v;
        }
        if let Some(v) = self.i_max {
            config.i_max = v;
        }
        if let Some(v) = self.feedback_mode {
            config.feedback_mode = match v {
                FeedbackModeArg::QueryDriven => FeedbackMode::QueryDriven,
                FeedbackModeArg::AnswerDriven => FeedbackMode::AnswerDriven,
            };
        }
        if let Some(v) = self.transport {
            config.transport = match v {
                TransportArg::Live => Transport::Live,
                TransportArg::Replay => Transport::Replay,
            };
        }
        if let Some(v) = &self.replay {
            config.replay_path = Some(v.clone());
        }
        if let Some(v) = self.embedder {
            config.embedder = match v {
                EmbedderArg::Mock => EmbedderKind::Mock,
                EmbedderArg::Live => EmbedderKind::Live,
            };
        }
        if let Some(v) = self.embed_dim {
            config.embed_dim = v;
        }
        if let Some(v) = self.embed_seed {
            config.embed_seed = v;
        }
        if let Some(v) = self.scorer {
            config.scorer = match v {
                ScorerArg::Embedding => ScorerKind::Embedding,
                ScorerArg::Llm => ScorerKind::Llm,
            };
        }
        if let Some(v) = &self.cache_dir {
            config.cache_dir = Some(v.clone());
        }
        if let Some(v) = self.workers {
            config.workers = v;
        }
        if self.shared_graph {
            config.shared_graph = true;
        }
        config
            .validate()
            .map_err(|e| CliError::Input(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a knowledge graph from a JSONL corpus.
    BuildKg(BuildKgArgs),
    /// Answer one question against a graph and corpus.
    Query(QueryArgs),
    /// Run the benchmark harness over a dataset.
    Eval(EvalArgs),
    /// Aggregate round statistics from trace files as CSV.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct BuildKgArgs {
    /// JSON Lines corpus: one {"id","title","text"} per line.
    #[arg(long)]
    pub corpus: PathBuf,

    /// Output graph file (.kg.jsonl).
    #[arg(long)]
    pub out: PathBuf,

    /// Optional JSON build report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Graph file produced by build-kg.
    #[arg(long)]
    pub kg: PathBuf,

    #[arg(long)]
    pub corpus: PathBuf,

    #[arg(long)]
    pub question: String,

    /// Round trace output (JSON Lines, one round per line).
    #[arg(long, default_value = "trace.jsonl")]
    pub trace: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSON Lines dataset: {"qid"?,"question","answers",contexts:[{title,text}]}.
    #[arg(long)]
    pub dataset: PathBuf,

    /// Random sample size (seeded); omit to evaluate everything.
    #[arg(long)]
    pub sample: Option<usize>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Report JSON output path.
    #[arg(long)]
    pub report: PathBuf,

    /// Directory for per-example trace files.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,

    /// Per-round CSV export (round,nodes,edges,em,f1).
    #[arg(long)]
    pub per_round_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Directory of .jsonl trace files.
    #[arg(long)]
    pub trace_dir: PathBuf,
}
