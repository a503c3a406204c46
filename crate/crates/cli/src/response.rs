use std::collections::BTreeSet;
use std::time::Instant;

use priorart_core::pipeline::{Engine, PipelineError, Query, RerankResult, SearchMode};
use serde::Serialize;

/// Parameters shared by `priorart search` and `GET /search`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchRequest {
    pub text: String,
    pub mode: SearchMode,
    pub n_candidates: usize,
    pub k_final: usize,
    pub require: Vec<String>,
    /// Adds `elapsed_ms`; bodies are then no longer reproducible.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResponse {
    pub query: String,
    pub mode: SearchMode,
    pub n: usize,
    pub k: usize,
    pub require: BTreeSet<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
    pub results: Vec<RerankResult>,
}

impl SearchResponse {
    /// Compact JSON, identical for identical requests when timing is off.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }
}

pub fn run_search(engine: &Engine, req: &SearchRequest) -> Result<SearchResponse, PipelineError> {
    let start = Instant::now();
    let query = Query::new(req.text.clone(), req.mode).with_counts(req.n_candidates, req.k_final).require(&req.require);
    let results = engine.search(&query)?;
    let elapsed_ms = req.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    Ok(SearchResponse {
        query: req.text.clone(),
        mode: req.mode,
        n: req.n_candidates,
        k: req.k_final,
        require: query.required_terms,
        elapsed_ms,
        results,
    })
}

/// Plain-text listing, one block per result.
pub fn render_listing(resp: &SearchResponse) -> String {
    let mut out = format!("query: {} ({}, n={}, k={})\n", resp.query, resp.mode, resp.n, resp.k);
    if !resp.require.is_empty() {
        let terms: Vec<&str> = resp.require.iter().map(String::as_str).collect();
        out.push_str(&format!("required: {}\n", terms.join(", ")));
    }
    if resp.results.is_empty() {
        out.push_str("no results\n");
    }
    for (i, r) in resp.results.iter().enumerate() {
        out.push_str(&format!("\n{}. patent: {} [ {} ] (span {})\n", i + 1, r.patent_id, r.label(), r.span_id));
        out.push_str(&format!("   text: {}\n", r.text));
        let ranks = match (r.bm25_rank, r.embed_rank) {
            (Some(b), Some(e)) => format!("ranked by BM25: {b} / re-ranked by embedding: {e}"),
            (Some(b), None) => format!("ranked by BM25: {b} (score {:.4})", r.bm25_score.unwrap_or_default()),
            (None, Some(e)) => format!("ranked by embedding: {e} (cosine {:.4})", r.cosine_score.unwrap_or_default()),
            (None, None) => String::new(),
        };
        out.push_str(&format!("   {ranks}\n"));
    }
    if let Some(ms) = resp.elapsed_ms {
        out.push_str(&format!("\nelapsed: {ms:.2} ms\n"));
    }
    out
}
