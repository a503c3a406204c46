use serde::{Deserialize, Serialize};

use super::{Engine, PipelineError, Query, SearchMode};
use crate::lexical::LexicalError;

/// A query with its known relevant spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub text: String,
    pub relevant: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSettings {
    pub k: usize,
    pub n_candidates: usize,
    pub modes: Vec<SearchMode>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { k: super::DEFAULT_K, n_candidates: super::DEFAULT_CANDIDATES, modes: SearchMode::ALL.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMetrics {
    pub mode: SearchMode,
    pub k: usize,
    pub queries: usize,
    pub recall_at_k: f64,
    pub mrr: f64,
}

/// Fraction of `relevant` found among the first `k` of `ranked`.
pub fn recall_at_k(ranked: &[u64], relevant: &[u64], k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let top = &ranked[..k.min(ranked.len())];
    let found = relevant.iter().filter(|r| top.contains(r)).count();
    found as f64 / relevant.len() as f64
}

/// `1 / rank` of the first relevant hit, or 0 when none is ranked.
pub fn reciprocal_rank(ranked: &[u64], relevant: &[u64]) -> f64 {
    ranked.iter().position(|id| relevant.contains(id)).map_or(0.0, |p| 1.0 / (p as f64 + 1.0))
}

/// Averages recall@k and MRR per mode. Queries that cannot be answered
/// (no query tokens, not embeddable) count as empty result lists.
pub fn evaluate_modes(
    engine: &Engine,
    queries: &[EvalQuery],
    settings: &EvalSettings,
) -> Result<Vec<ModeMetrics>, PipelineError> {
    if queries.is_empty() {
        return Ok(Vec::new());
    }
    for q in queries {
        if q.relevant.is_empty() {
            return Err(PipelineError::InvalidQuery(format!("query `{}` has no relevant spans", q.text)));
        }
        if let Some(&id) = q.relevant.iter().find(|&&id| engine.span(id).is_none()) {
            return Err(PipelineError::UnknownSpan(id));
        }
    }
    let mut table = Vec::with_capacity(settings.modes.len());
    for &mode in &settings.modes {
        let (mut recall, mut rr) = (0.0, 0.0);
        for q in queries {
            let query = Query::new(q.text.clone(), mode).with_counts(settings.n_candidates, settings.k);
            let ranked: Vec<u64> = match engine.search(&query) {
                Ok(hits) => hits.iter().map(|h| h.span_id).collect(),
                Err(PipelineError::QueryNotEmbeddable | PipelineError::Lexical(LexicalError::EmptyQuery)) => Vec::new(),
                Err(e) => return Err(e),
            };
            recall += recall_at_k(&ranked, &q.relevant, settings.k);
            rr += reciprocal_rank(&ranked, &q.relevant);
        }
        let n = queries.len() as f64;
        table.push(ModeMetrics { mode, k: settings.k, queries: queries.len(), recall_at_k: recall / n, mrr: rr / n });
    }
    Ok(table)
}
