use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use priorart_core::corpus::{
    emit_bert_dataset, emit_gpt2_dataset, ingest, parse_tsv, CorpusError, EmissionStats, MetadataMapping, ParseOutcome,
    TsvSchema,
};
use priorart_core::embedding::{load_embeddings, HashEmbedder};
use priorart_core::pipeline::{evaluate_modes, BuildOptions, Engine, EvalQuery, EvalSettings, ModeMetrics, SearchMode};
use priorart_core::storage::{
    load_index, save_index, EMBEDDINGS_FILE, FOREST_FILE, MANIFEST_FILE, POSTINGS_FILE, SPANS_FILE,
};
use serde::Serialize;

use crate::config::EngineConfig;
use crate::error::CliError;
use crate::response::{render_listing, run_search, SearchRequest};

const INDEX_FILES: [&str; 5] = [MANIFEST_FILE, SPANS_FILE, POSTINGS_FILE, EMBEDDINGS_FILE, FOREST_FILE];

/// Parses a corpus file; any malformed row fails the whole read.
pub fn read_corpus(path: &Path) -> Result<ParseOutcome, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let outcome = parse_tsv(BufReader::new(file), &TsvSchema::default()).map_err(|e| CliError::corpus(path, e))?;
    if !outcome.errors.is_empty() {
        let lines: Vec<String> = outcome.errors.iter().map(|e| format!("{}:{e}", path.display())).collect();
        return Err(CliError::usage(lines.join("\n")));
    }
    Ok(outcome)
}

pub fn load_engine(dir: &Path) -> Result<Engine, CliError> {
    if !dir.is_dir() {
        return Err(CliError::usage(format!("{}: index directory does not exist", dir.display())));
    }
    load_index(dir).map_err(CliError::persist)
}

fn check_index_dir(dir: &Path, overwrite: bool) -> Result<(), CliError> {
    let mut entries = match fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(CliError::io(dir, e)),
    };
    if entries.next().is_none() {
        return Ok(());
    }
    if !dir.join(MANIFEST_FILE).exists() {
        return Err(CliError::usage(format!(
            "{}: directory is not empty and holds no index; refusing to write into it",
            dir.display()
        )));
    }
    if !overwrite {
        return Err(CliError::usage(format!(
            "{}: index already exists; pass --overwrite to replace it",
            dir.display()
        )));
    }
    Ok(())
}

fn clear_index_dir(dir: &Path) -> Result<(), CliError> {
    for name in INDEX_FILES {
        let path = dir.join(name);
        match fs::remove_file(&path) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(CliError::runtime(format!("{}: {e}", path.display()))),
        }
    }
    Ok(())
}

pub struct IngestOptions {
    pub tsv: PathBuf,
    pub index_dir: PathBuf,
    pub overwrite: bool,
    pub build_forest: bool,
}

#[derive(Debug, Serialize)]
pub struct IngestStats {
    pub documents: usize,
    pub spans: usize,
    pub terms: usize,
    pub skipped_rows: usize,
    pub embedder: String,
    pub dim: usize,
    pub trees: usize,
    pub index_dir: PathBuf,
}

pub fn run_ingest(cfg: &EngineConfig, opts: &IngestOptions) -> Result<String, CliError> {
    check_index_dir(&opts.index_dir, opts.overwrite)?;
    let outcome = read_corpus(&opts.tsv)?;
    let spans = ingest(&outcome.documents).map_err(|e| CliError::corpus(&opts.tsv, e))?.spans;
    if spans.is_empty() {
        return Err(CliError::usage(format!("{}: corpus contains no spans", opts.tsv.display())));
    }
    let build = BuildOptions { bm25: cfg.bm25, ann: opts.build_forest.then_some(cfg.ann) };
    let engine = match &cfg.vectors {
        Some(path) => {
            let file = File::open(path).map_err(|e| CliError::io(path, e))?;
            let store = load_embeddings(BufReader::new(file))
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            let known = spans.len() as u64;
            if let Some((id, _)) = store.iter().find(|(id, _)| *id >= known) {
                return Err(CliError::usage(format!("{}: vector for unknown span id {id}", path.display())));
            }
            Engine::build_with_vectors(spans, store, build)?
        }
        None => {
            let embedder = HashEmbedder::new(cfg.dim).map_err(|e| CliError::usage(e.to_string()))?;
            Engine::build(spans, Arc::new(embedder), build)?
        }
    };
    clear_index_dir(&opts.index_dir)?;
    save_index(&engine, &opts.index_dir).map_err(CliError::persist)?;
    let stats = IngestStats {
        documents: outcome.documents.len(),
        spans: engine.spans().len(),
        terms: engine.lexical().term_count(),
        skipped_rows: outcome.skipped_rows,
        embedder: engine.embedder().descriptor().name,
        dim: engine.embeddings().dim(),
        trees: engine.forest().map_or(0, |f| f.n_trees()),
        index_dir: opts.index_dir.clone(),
    };
    Ok(serde_json::to_string(&stats).expect("stats serialize"))
}

pub fn run_search_command(engine: &Engine, req: &SearchRequest, json: bool) -> Result<String, CliError> {
    let resp = run_search(engine, req)?;
    Ok(if json { resp.to_json() } else { render_listing(&resp).trim_end().to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Gpt2,
    Bert,
}

pub fn parse_mappings(names: &[String]) -> Result<Vec<MetadataMapping>, CliError> {
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let m: MetadataMapping = name.parse().map_err(|e: CorpusError| CliError::usage(e.to_string()))?;
        if m == MetadataMapping::Figure2Title {
            return Err(CliError::usage(CorpusError::ReservedMapping.to_string()));
        }
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

pub fn run_emit(tsv: &Path, format: EmitFormat, out: &Path, mappings: &[String]) -> Result<String, CliError> {
    let mappings = parse_mappings(mappings)?;
    if format == EmitFormat::Bert && !mappings.is_empty() {
        return Err(CliError::usage("mappings apply to the gpt2 format only"));
    }
    let outcome = read_corpus(tsv)?;
    let file = File::create(out).map_err(|e| CliError::io(out, e))?;
    let mut sink = BufWriter::new(file);
    let mut stats: EmissionStats = match format {
        EmitFormat::Gpt2 => emit_gpt2_dataset(&outcome.documents, &mappings, &mut sink),
        EmitFormat::Bert => emit_bert_dataset(&outcome.documents, &mut sink),
    }
    .map_err(|e| CliError::corpus(tsv, e))?;
    sink.flush().map_err(|e| CliError::runtime(format!("{}: {e}", out.display())))?;
    stats.skipped_rows = outcome.skipped_rows;
    Ok(serde_json::to_string(&stats).expect("stats serialize"))
}

pub fn read_eval_queries(path: &Path) -> Result<Vec<EvalQuery>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Without explicit modes, every mode the index supports is evaluated.
pub fn run_eval(
    engine: &Engine,
    queries: &[EvalQuery],
    k: usize,
    n_candidates: usize,
    modes: &[SearchMode],
) -> Result<Vec<ModeMetrics>, CliError> {
    let modes = if modes.is_empty() {
        SearchMode::ALL.into_iter().filter(|m| *m != SearchMode::EmbeddingOnly || engine.forest().is_some()).collect()
    } else {
        modes.to_vec()
    };
    let settings = EvalSettings { k, n_candidates, modes };
    Ok(evaluate_modes(engine, queries, &settings)?)
}
