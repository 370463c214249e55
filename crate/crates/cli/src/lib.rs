//! `insertrank` command-line pipeline: index, retrieve, rerank, eval,
//! ablate.
//!
//! Exit codes are a stable scripting contract: 0 success, 1 runtime/data
//! error, 2 usage error.

pub mod commands;
pub mod config;
pub mod provider;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Command failure, split by exit code.
#[derive(Debug)]
pub enum CmdError {
    /// Bad flags or config shape; exit 2.
    Usage(String),
    /// Data or runtime failure; exit 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CmdError {
    fn from(err: anyhow::Error) -> Self {
        CmdError::Runtime(err)
    }
}

pub type CmdResult = Result<(), CmdError>;

#[derive(Parser)]
#[command(
    name = "insertrank",
    version,
    about = "BM25 retrieval, score-injected listwise LLM reranking, and NDCG evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Build a BM25 index file from a JSONL corpus.
    Index(IndexArgs),
    /// Run first-stage BM25 retrieval, writing a TREC run file.
    Retrieve(RetrieveArgs),
    /// Rerank a first-stage run with a listwise LLM prompt.
    Rerank(RerankArgs),
    /// Score a run against qrels with NDCG@k.
    Eval(EvalArgs),
    /// Run a normalization/shuffling ablation sweep from a config file.
    Ablate(AblateArgs),
}

#[derive(Args)]
pub struct IndexArgs {
    /// JSONL corpus with "_id", optional "title", and "text" per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output index file (binary, "BMIX1" header).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.4)]
    pub b: f64,
}

#[derive(Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Query file (JSONL with "_id"/"text", or 2-column TSV).
    #[arg(long)]
    pub queries: PathBuf,
    /// Query file format: jsonl or tsv (default: guess from extension).
    #[arg(long)]
    pub queries_format: Option<String>,
    /// Optional TSV of `query_id<TAB>reformulated_text`; retrieval then
    /// uses the reformulated text.
    #[arg(long)]
    pub reformulations: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RerankArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub queries_format: Option<String>,
    #[arg(long)]
    pub reformulations: Option<PathBuf>,
    /// First-stage TREC run file supplying the candidate pool.
    #[arg(long)]
    pub run: PathBuf,
    /// Provider name: a registry entry (openai, deepseek, gemini, or one
    /// from --providers-config), or mock-identity / mock-reverse /
    /// mock-oracle / mock-scripted.
    #[arg(long)]
    pub provider: String,
    #[arg(long)]
    pub model: String,
    /// none, raw, norm01 or norm0100.
    #[arg(long, default_value = "raw")]
    pub score_mode: String,
    /// bm25_desc or shuffle (shuffle requires --seed).
    #[arg(long, default_value = "bm25_desc")]
    pub order: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
    /// Candidate pool size taken from the top of the first-stage run.
    #[arg(long, default_value_t = 100)]
    pub candidates: usize,
    /// Per-document whitespace-token budget (e.g. 1800 for short-context
    /// models); unset keeps full documents.
    #[arg(long)]
    pub max_doc_tokens: Option<usize>,
    /// Prompt template: bright or r2med.
    #[arg(long, default_value = "bright")]
    pub template: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Outcome log path (default: `<out>.outcomes.jsonl`).
    #[arg(long)]
    pub outcome_log: Option<PathBuf>,
    #[arg(long, default_value = ".insertrank_cache")]
    pub cache_dir: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long)]
    pub max_output_tokens: Option<u32>,
    /// Parallel in-flight queries.
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    /// Put the original query text in the prompt even when a reformulation
    /// is attached.
    #[arg(long)]
    pub use_original_query: bool,
    /// TOML file with extra `[[providers]]` entries.
    #[arg(long)]
    pub providers_config: Option<PathBuf>,
    /// Qrels file; required by --provider mock-oracle.
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// JSON array of scripted responses; required by mock-scripted.
    #[arg(long)]
    pub script: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Qrels: TREC 4-column or TSV 3-column (default: sniffed).
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long)]
    pub qrels_format: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Gain function: linear or exp.
    #[arg(long, default_value = "linear")]
    pub gain: String,
    /// Also write a per-query TSV report here.
    #[arg(long)]
    pub per_query: Option<PathBuf>,
}

#[derive(Args)]
pub struct AblateArgs {
    /// TOML experiment config; paths inside resolve relative to it.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's out_dir.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Parse argv and run; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Index(args) => commands::index::run(args),
        Command::Retrieve(args) => commands::retrieve::run(args),
        Command::Rerank(args) => commands::rerank::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Ablate(args) => commands::ablate::run(args),
    };
    match result {
        Ok(()) => 0,
        Err(CmdError::Usage(message)) => {
            eprintln!("error: {message}");
            2
        }
        Err(CmdError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}
