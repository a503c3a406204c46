//! Inverted index over spans with Okapi BM25 ranking.
//!
//! Scoring follows the Lucene formulation used by Elasticsearch out of the
//! box:
//!
//! ```text
//! idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
//! score(q, d) = Σ_t idf(t) · tf·(k1 + 1) / (tf + k1·(1 - b + b·dl/avgdl))
//! ```
//!
//! with `k1 = 1.2` and `b = 0.75` unless configured otherwise.

mod index;
mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use index::DocEntry;
pub use index::{LexicalIndex, LexicalIndexBuilder};
pub use tokenize::{term_set, tokenize};

#[derive(Debug, Error, PartialEq)]
pub enum LexicalError {
    #[error("span {0} is already indexed")]
    DuplicateSpan(u64),
    #[error("span {0} is not indexed")]
    UnknownSpan(u64),
    #[error("empty query")]
    EmptyQuery,
    #[error("result count must be at least 1")]
    ZeroResults,
    #[error("invalid BM25 parameters k1={k1} b={b}: need k1 >= 0 and 0 <= b <= 1")]
    InvalidParams { k1: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self, LexicalError> {
        let params = Self { k1, b };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), LexicalError> {
        if self.k1.is_finite() && self.k1 >= 0.0 && (0.0..=1.0).contains(&self.b) {
            Ok(())
        } else {
            Err(LexicalError::InvalidParams { k1: self.k1, b: self.b })
        }
    }

    /// Contribution of one matching term.
    #[inline]
    pub fn term_score(&self, idf: f64, tf: f64, doc_len: f64, avgdl: f64) -> f64 {
        let norm = 1.0 - self.b + self.b * doc_len / avgdl;
        idf * (tf * (self.k1 + 1.0) / (tf + self.k1 * norm))
    }
}

/// Lucene IDF. Strictly positive for `1 <= df <= n`.
#[inline]
pub fn idf(df: u64, n: u64) -> f64 {
    let (df, n) = (df as f64, n as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub span_id: u64,
    pub term_frequency: u32,
}

/// One ranked hit. Ranks are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub span_id: u64,
    pub score: f64,
    pub rank: u32,
}

/// Sorts by score descending then span id ascending, keeps the first `n`
/// and assigns ranks.
pub fn rank_top_n(mut hits: Vec<(u64, f64)>, n: usize) -> Vec<ScoredSpan> {
    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    hits.truncate(n);
    hits.into_iter()
        .enumerate()
        .map(|(i, (span_id, score))| ScoredSpan { span_id, score, rank: i as u32 + 1 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_match_elasticsearch() {
        let p = Bm25Params::default();
        assert_eq!((p.k1, p.b), (1.2, 0.75));
    }

    #[test]
    fn params_validated() {
        assert!(Bm25Params::new(-0.1, 0.5).is_err());
        assert!(Bm25Params::new(1.0, 1.5).is_err());
        assert!(Bm25Params::new(f64::NAN, 0.5).is_err());
        assert!(Bm25Params::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn ties_break_by_span_id() {
        let ranked = rank_top_n(vec![(5, 1.0), (2, 1.0), (9, 3.0)], 10);
        let ids: Vec<u64> = ranked.iter().map(|s| s.span_id).collect();
        assert_eq!(ids, vec![9, 2, 5]);
        assert_eq!(ranked[2].rank, 3);
    }

    proptest! {
        #[test]
        fn idf_positive(n in 1u64..1_000_000, frac in 0.0f64..=1.0) {
            let df = ((n as f64 * frac) as u64).clamp(1, n);
            prop_assert!(idf(df, n) > 0.0);
        }

        #[test]
        fn term_score_increases_with_tf(
            tf in 1u32..500,
            dl in 1u32..1000,
            avgdl in 0.5f64..500.0,
            k1 in 0.01f64..3.0,
            b in 0.0f64..=1.0,
        ) {
            let p = Bm25Params { k1, b };
            let w = idf(3, 100);
            let lo = p.term_score(w, tf as f64, dl as f64, avgdl);
            let hi = p.term_score(w, tf as f64 + 1.0, dl as f64, avgdl);
            prop_assert!(hi > lo);
        }
    }
}
