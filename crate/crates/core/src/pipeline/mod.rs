//! Two-stage search: BM25 retrieves candidates for recall, cosine
//! similarity of embeddings reorders them for precision.
//!
//! The embedding stage only ever reorders what BM25 returned; it never
//! introduces candidates of its own. Each result carries both its rank in
//! the BM25 candidate list and its rank after reranking, so rank movement
//! (say 26 -> 3) is visible to the caller.

mod eval;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ann::{AnnError, AnnForest, AnnParams, AnnQueryBudget};
use crate::corpus::{SectionKind, SpanRecord};
use crate::embedding::{cosine_slices, Embedder, EmbeddingError, EmbeddingStore, LookupEmbedder};
use crate::lexical::{term_set, Bm25Params, LexicalError, LexicalIndex, ScoredSpan};

pub use eval::{evaluate_modes, recall_at_k, reciprocal_rank, EvalQuery, EvalSettings, ModeMetrics};

pub const DEFAULT_CANDIDATES: usize = 100;
pub const DEFAULT_K: usize = 10;

/// Extra widening of the ANN budget when required terms are post-filtered.
const REQUIRED_TERM_WIDENING: usize = 4;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Lexical(#[from] LexicalError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Ann(#[from] AnnError),
    #[error("query not embeddable")]
    QueryNotEmbeddable,
    #[error("embedding_only search needs an ANN forest")]
    NoForest,
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("unknown span id {0}")]
    UnknownSpan(u64),
    #[error("inconsistent components: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Bm25Only,
    EmbeddingOnly,
    Rerank,
}

impl SearchMode {
    pub const ALL: [SearchMode; 3] = [SearchMode::Bm25Only, SearchMode::EmbeddingOnly, SearchMode::Rerank];

    pub fn as_str(self) -> &'static str {
        match self {
            SearchMode::Bm25Only => "bm25_only",
            SearchMode::EmbeddingOnly => "embedding_only",
            SearchMode::Rerank => "rerank",
        }
    }
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SearchMode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SearchMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| PipelineError::InvalidQuery(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub text: String,
    pub mode: SearchMode,
    pub n_candidates: usize,
    pub k_final: usize,
    pub required_terms: BTreeSet<String>,
}

impl Query {
    pub fn new(text: impl Into<String>, mode: SearchMode) -> Self {
        Self {
            text: text.into(),
            mode,
            n_candidates: DEFAULT_CANDIDATES,
            k_final: DEFAULT_K,
            required_terms: BTreeSet::new(),
        }
    }

    pub fn with_counts(mut self, n_candidates: usize, k_final: usize) -> Self {
        self.n_candidates = n_candidates;
        self.k_final = k_final;
        self
    }

    /// Adds required terms; they are tokenized like span text.
    pub fn require<I, S>(mut self, terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.required_terms.extend(term_set(terms));
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.k_final == 0 || self.n_candidates == 0 {
            return Err(PipelineError::InvalidQuery("n and k must be at least 1".into()));
        }
        if self.mode == SearchMode::Rerank && self.k_final > self.n_candidates {
            return Err(PipelineError::InvalidQuery(format!(
                "k ({}) must not exceed n ({}) in rerank mode",
                self.k_final, self.n_candidates
            )));
        }
        Ok(())
    }
}

/// One returned span with whichever ranks the mode produced. Field order is
/// the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankResult {
    pub span_id: u64,
    pub patent_id: String,
    pub kind: SectionKind,
    pub ordinal: u32,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bm25_rank: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bm25_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_rank: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cosine_score: Option<f64>,
}

impl RerankResult {
    fn from_span(span: &SpanRecord) -> Self {
        Self {
            span_id: span.span_id,
            patent_id: span.patent_id.clone(),
            kind: span.kind,
            ordinal: span.ordinal,
            text: span.text.clone(),
            bm25_rank: None,
            bm25_score: None,
            embed_rank: None,
            cosine_score: None,
        }
    }

    /// Listing label such as `A-4`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.kind.code(), self.ordinal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub bm25: Bm25Params,
    /// `None` skips building the forest (embedding_only unavailable).
    pub ann: Option<AnnParams>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { bm25: Bm25Params::default(), ann: Some(AnnParams::default()) }
    }
}

/// Immutable search components over one corpus.
pub struct Engine {
    spans: Vec<SpanRecord>,
    by_id: HashMap<u64, usize>,
    lexical: LexicalIndex,
    embeddings: EmbeddingStore,
    forest: Option<AnnForest>,
    embedder: Arc<dyn Embedder>,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("spans", &self.spans.len())
            .field("terms", &self.lexical.term_count())
            .field("vectors", &self.embeddings.len())
            .field("forest", &self.forest.as_ref().map(|f| f.n_trees()))
            .field("embedder", &self.embedder.descriptor().name)
            .finish()
    }
}

impl Engine {
    pub fn new(
        spans: Vec<SpanRecord>,
        lexical: LexicalIndex,
        embeddings: EmbeddingStore,
        forest: Option<AnnForest>,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self, PipelineError> {
        let mut by_id = HashMap::with_capacity(spans.len());
        for (i, s) in spans.iter().enumerate() {
            if by_id.insert(s.span_id, i).is_some() {
                return Err(PipelineError::Inconsistent(format!("duplicate span id {}", s.span_id)));
            }
        }
        if embedder.dim() != embeddings.dim() {
            return Err(PipelineError::Inconsistent(format!(
                "embedder dim {} vs store dim {}",
                embedder.dim(),
                embeddings.dim()
            )));
        }
        if let Some(f) = &forest {
            if f.dim() != embeddings.dim() {
                return Err(PipelineError::Inconsistent("forest and store dimensions differ".into()));
            }
        }
        if lexical.len() != spans.len() {
            return Err(PipelineError::Inconsistent("lexical index and span store sizes differ".into()));
        }
        Ok(Self { spans, by_id, lexical, embeddings, forest, embedder })
    }

    /// Indexes `spans`, embeds each with `embedder` and optionally builds the
    /// forest.
    pub fn build(
        spans: Vec<SpanRecord>,
        embedder: Arc<dyn Embedder>,
        options: BuildOptions,
    ) -> Result<Self, PipelineError> {
        let lexical = LexicalIndex::build(options.bm25, &spans)?;
        let embeddings = EmbeddingStore::from_spans(embedder.as_ref(), &spans)?;
        let forest = match options.ann {
            Some(params) if !embeddings.is_empty() => Some(AnnForest::build(&embeddings, params)?),
            _ => None,
        };
        Self::new(spans, lexical, embeddings, forest, embedder)
    }

    /// Like [`build`](Self::build) but with externally computed vectors.
    /// Query text is embedded by exact-text lookup into those vectors.
    pub fn build_with_vectors(
        spans: Vec<SpanRecord>,
        embeddings: EmbeddingStore,
        options: BuildOptions,
    ) -> Result<Self, PipelineError> {
        let lexical = LexicalIndex::build(options.bm25, &spans)?;
        let forest = match options.ann {
            Some(params) if !embeddings.is_empty() => Some(AnnForest::build(&embeddings, params)?),
            _ => None,
        };
        let embedder = Arc::new(LookupEmbedder::new(&embeddings, &spans));
        Self::new(spans, lexical, embeddings, forest, embedder)
    }

    pub fn spans(&self) -> &[SpanRecord] {
        &self.spans
    }

    pub fn span(&self, span_id: u64) -> Option<&SpanRecord> {
        self.by_id.get(&span_id).map(|&i| &self.spans[i])
    }

    pub fn lexical(&self) -> &LexicalIndex {
        &self.lexical
    }

    pub fn embeddings(&self) -> &EmbeddingStore {
        &self.embeddings
    }

    pub fn forest(&self) -> Option<&AnnForest> {
        self.forest.as_ref()
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    fn span_or_err(&self, span_id: u64) -> Result<&SpanRecord, PipelineError> {
        self.span(span_id).ok_or(PipelineError::UnknownSpan(span_id))
    }

    pub fn search(&self, query: &Query) -> Result<Vec<RerankResult>, PipelineError> {
        query.validate()?;
        match query.mode {
            SearchMode::Bm25Only => self.search_bm25_only(query),
            SearchMode::EmbeddingOnly => self.search_embedding_only(query),
            SearchMode::Rerank => self.search_rerank(query),
        }
    }

    fn search_bm25_only(&self, query: &Query) -> Result<Vec<RerankResult>, PipelineError> {
        let hits = self.lexical.search(&query.text, query.k_final, &query.required_terms)?;
        hits.iter()
            .map(|h| {
                let mut r = RerankResult::from_span(self.span_or_err(h.span_id)?);
                r.bm25_rank = Some(h.rank);
                r.bm25_score = Some(h.score);
                Ok(r)
            })
            .collect()
    }

    fn search_embedding_only(&self, query: &Query) -> Result<Vec<RerankResult>, PipelineError> {
        let forest = self.forest.as_ref().ok_or(PipelineError::NoForest)?;
        let qv = self.embedder.embed(&query.text);
        if qv.is_zero() {
            return Err(PipelineError::QueryNotEmbeddable);
        }
        let hits: Vec<ScoredSpan> = if query.required_terms.is_empty() {
            forest.query(&self.embeddings, &qv, AnnQueryBudget::new(query.k_final))?
        } else {
            let widened = forest.n_trees() * query.k_final * 4 * REQUIRED_TERM_WIDENING;
            forest
                .query(&self.embeddings, &qv, AnnQueryBudget::with_search_k(widened, widened))?
                .into_iter()
                .filter(|h| self.contains_all(h.span_id, &query.required_terms))
                .take(query.k_final)
                .collect()
        };
        hits.iter()
            .enumerate()
            .map(|(i, h)| {
                let mut r = RerankResult::from_span(self.span_or_err(h.span_id)?);
                r.embed_rank = Some(i as u32 + 1);
                r.cosine_score = Some(h.score);
                Ok(r)
            })
            .collect()
    }

    fn contains_all(&self, span_id: u64, terms: &BTreeSet<String>) -> bool {
        terms.iter().all(|t| self.lexical.term_frequency(t, span_id) > 0)
    }

    fn search_rerank(&self, query: &Query) -> Result<Vec<RerankResult>, PipelineError> {
        let candidates = self.lexical.search(&query.text, query.n_candidates, &query.required_terms)?;
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let qv = self.embedder.embed(&query.text);
        if qv.is_zero() {
            return Err(PipelineError::QueryNotEmbeddable);
        }
        let mut scored = Vec::with_capacity(candidates.len());
        for c in &candidates {
            let span = self.span_or_err(c.span_id)?;
            let cos = match self.embeddings.get(c.span_id) {
                Some(v) => cosine_slices(qv.as_slice(), v.as_slice()),
                None => cosine_slices(qv.as_slice(), self.embedder.embed(&span.text).as_slice()),
            };
            scored.push((c, span, cos));
        }
        scored.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.span_id.cmp(&b.0.span_id)));
        scored.truncate(query.k_final);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, (c, span, cos))| {
                let mut r = RerankResult::from_span(span);
                r.bm25_rank = Some(c.rank);
                r.bm25_score = Some(c.score);
                r.embed_rank = Some(i as u32 + 1);
                r.cosine_score = Some(cos);
                r
            })
            .collect())
    }
}
