//! The `priorart` command-line tool and its JSON query service.

pub mod commands;
pub mod config;
pub mod error;
pub mod response;
pub mod service;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use priorart_core::pipeline::SearchMode;

use crate::commands::{EmitFormat, IngestOptions};
use crate::config::EngineConfig;
use crate::error::CliError;
use crate::response::SearchRequest;
use crate::service::AppState;

#[derive(Debug, Parser)]
#[command(name = "priorart", version, about = "Patent prior-art search: BM25 retrieval with embedding rerank")]
pub struct Cli {
    /// Flat JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a TSV corpus and write a searchable index.
    Ingest(IngestArgs),
    /// Query an index.
    Search(SearchArgs),
    /// Write a training dataset from a TSV corpus.
    Emit(EmitArgs),
    /// Report recall@k and MRR per search mode.
    Eval(EvalArgs),
    /// Serve the read-only JSON query API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IndexDirArg {
    /// Index directory.
    #[arg(long, env = "PRIORART_INDEX_DIR", value_name = "DIR")]
    pub index_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Corpus with header `patent_id<TAB>kind<TAB>text`.
    #[arg(long, value_name = "PATH")]
    pub tsv: PathBuf,
    #[command(flatten)]
    pub index: IndexDirArg,
    /// Replace an existing index.
    #[arg(long)]
    pub overwrite: bool,
    /// Precomputed span vectors (`#dim=D` header, `span_id<TAB>v1,v2,..` rows).
    #[arg(long, value_name = "PATH")]
    pub vectors: Option<PathBuf>,
    /// Hash embedder dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// BM25 term-frequency saturation (default 1.2).
    #[arg(long)]
    pub k1: Option<f64>,
    /// BM25 length normalization in [0, 1] (default 0.75).
    #[arg(long)]
    pub b: Option<f64>,
    /// ANN tree count (default 50).
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Maximum ids per ANN leaf (default 16).
    #[arg(long)]
    pub leaf_capacity: Option<usize>,
    /// ANN build seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip the ANN forest; embedding_only search is then unavailable.
    #[arg(long)]
    pub no_ann: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(name = "bm25_only")]
    Bm25Only,
    #[value(name = "embedding_only")]
    EmbeddingOnly,
    #[value(name = "rerank")]
    Rerank,
}

impl From<ModeArg> for SearchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Bm25Only => SearchMode::Bm25Only,
            ModeArg::EmbeddingOnly => SearchMode::EmbeddingOnly,
            ModeArg::Rerank => SearchMode::Rerank,
        }
    }
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Plain query text.
    pub query: String,
    #[command(flatten)]
    pub index: IndexDirArg,
    #[arg(long, value_enum, default_value = "rerank")]
    pub mode: ModeArg,
    /// BM25 candidates fetched before reranking.
    #[arg(long)]
    pub n: Option<usize>,
    /// Results returned.
    #[arg(long)]
    pub k: Option<usize>,
    /// Term every result must contain; repeatable.
    #[arg(long, value_name = "TERM")]
    pub require: Vec<String>,
    /// Print the JSON response instead of the listing.
    #[arg(long)]
    pub json: bool,
    /// Include elapsed_ms in the response.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Gpt2,
    Bert,
}

#[derive(Debug, Args)]
pub struct EmitArgs {
    /// Corpus with header `patent_id<TAB>kind<TAB>text`.
    #[arg(long, value_name = "PATH")]
    pub tsv: PathBuf,
    /// Tagged text (gpt2) or span-per-line text (bert).
    #[arg(long, value_enum)]
    pub format: FormatArg,
    /// Output file.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Metadata mapping such as title2abstract; repeatable, gpt2 only.
    #[arg(long, value_name = "NAME")]
    pub mapping: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub index: IndexDirArg,
    /// JSON array of `{"text": .., "relevant": [span ids]}`.
    #[arg(long, value_name = "PATH")]
    pub queries: PathBuf,
    /// Cutoff for recall and results per query.
    #[arg(long)]
    pub k: Option<usize>,
    /// BM25 candidates fetched before reranking.
    #[arg(long)]
    pub n: Option<usize>,
    /// Mode to evaluate; repeatable. Defaults to every available mode.
    #[arg(long, value_enum)]
    pub mode: Vec<ModeArg>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub index: IndexDirArg,
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = EngineConfig::load(cli.config.as_deref())?;
    let text = match cli.command {
        Command::Ingest(a) => {
            cfg.dim = a.dim.unwrap_or(cfg.dim);
            cfg.bm25.k1 = a.k1.unwrap_or(cfg.bm25.k1);
            cfg.bm25.b = a.b.unwrap_or(cfg.bm25.b);
            cfg.ann.n_trees = a.n_trees.unwrap_or(cfg.ann.n_trees);
            cfg.ann.leaf_capacity = a.leaf_capacity.unwrap_or(cfg.ann.leaf_capacity);
            cfg.ann.seed = a.seed.unwrap_or(cfg.ann.seed);
            if a.vectors.is_some() {
                cfg.vectors = a.vectors;
            }
            cfg.validate()?;
            let opts = IngestOptions {
                tsv: a.tsv,
                index_dir: cfg.index_dir(a.index.index_dir.as_deref())?,
                overwrite: a.overwrite,
                build_forest: !a.no_ann,
            };
            commands::run_ingest(&cfg, &opts)?
        }
        Command::Search(a) => {
            cfg.validate()?;
            let engine = commands::load_engine(&cfg.index_dir(a.index.index_dir.as_deref())?)?;
            let req = SearchRequest {
                text: a.query,
                mode: a.mode.into(),
                n_candidates: a.n.unwrap_or(cfg.n_candidates),
                k_final: a.k.unwrap_or(cfg.k_final),
                require: a.require,
                timing: a.timing,
            };
            commands::run_search_command(&engine, &req, a.json)?
        }
        Command::Emit(a) => {
            let format = match a.format {
                FormatArg::Gpt2 => EmitFormat::Gpt2,
                FormatArg::Bert => EmitFormat::Bert,
            };
            commands::run_emit(&a.tsv, format, &a.out, &a.mapping)?
        }
        Command::Eval(a) => {
            cfg.validate()?;
            let queries = commands::read_eval_queries(&a.queries)?;
            let engine = commands::load_engine(&cfg.index_dir(a.index.index_dir.as_deref())?)?;
            let modes: Vec<SearchMode> = a.mode.into_iter().map(Into::into).collect();
            let table = commands::run_eval(
                &engine,
                &queries,
                a.k.unwrap_or(cfg.k_final),
                a.n.unwrap_or(cfg.n_candidates),
                &modes,
            )?;
            serde_json::to_string(&table).expect("metrics serialize")
        }
        Command::Serve(a) => {
            cfg.validate()?;
            let engine = commands::load_engine(&cfg.index_dir(a.index.index_dir.as_deref())?)?;
            let state = Arc::new(AppState { engine, n_candidates: cfg.n_candidates, k_final: cfg.k_final });
            return run_server(&a.bind, state);
        }
    };
    writeln!(out, "{text}").map_err(|e| CliError::runtime(e.to_string()))
}

fn run_server(bind: &str, state: Arc<AppState>) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::runtime(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| CliError::runtime(format!("cannot bind {bind}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CliError::runtime(e.to_string()))?;
        eprintln!("listening on http://{addr} ({} spans)", state.engine.spans().len());
        service::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
}
