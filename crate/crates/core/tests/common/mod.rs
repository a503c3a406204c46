#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use priorart_core::corpus::{SectionKind, SpanRecord};
use priorart_core::embedding::HashEmbedder;
use priorart_core::pipeline::{BuildOptions, Engine};
use rand::Rng;

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;

pub fn word(i: usize) -> String {
    format!("w{i}")
}

/// Skewed word draw so that low indices are frequent.
pub fn skewed_word<R: Rng>(rng: &mut R, vocab: usize) -> String {
    let u: f64 = rng.random();
    word(((u * u) * vocab as f64) as usize % vocab)
}

pub fn span(id: u64, text: String) -> SpanRecord {
    let kind = match id % 3 {
        0 => SectionKind::Abstract,
        1 => SectionKind::IndependentClaim,
        _ => SectionKind::Title,
    };
    SpanRecord { span_id: id, patent_id: format!("P{}", id / 4), kind, ordinal: (id % 4) as u32, text }
}

/// Spans of 1..=max_len skewed words; repeats within a span are allowed.
pub fn random_spans<R: Rng>(rng: &mut R, n: usize, vocab: usize, max_len: usize) -> Vec<SpanRecord> {
    (0..n as u64)
        .map(|id| {
            let len = rng.random_range(1..=max_len);
            let words: Vec<String> = (0..len).map(|_| skewed_word(rng, vocab)).collect();
            span(id, words.join(" "))
        })
        .collect()
}

/// Spans of distinct uniform words whose word sets are pairwise distinct.
pub fn distinct_spans<R: Rng>(
    rng: &mut R,
    n: usize,
    vocab: usize,
    len: std::ops::RangeInclusive<usize>,
) -> Vec<SpanRecord> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let l = rng.random_range(len.clone());
        let mut set = BTreeSet::new();
        while set.len() < l {
            set.insert(rng.random_range(0..vocab));
        }
        if !seen.insert(set.clone()) {
            continue;
        }
        let mut words: Vec<String> = set.into_iter().map(word).collect();
        for i in (1..words.len()).rev() {
            words.swap(i, rng.random_range(0..=i));
        }
        out.push(span(out.len() as u64, words.join(" ")));
    }
    out
}

pub fn hash_engine(spans: Vec<SpanRecord>, dim: usize, ann: bool) -> Engine {
    let options = BuildOptions { ann: ann.then(Default::default), ..Default::default() };
    Engine::build(spans, Arc::new(HashEmbedder::new(dim).unwrap()), options).unwrap()
}

pub fn oracle_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(|t| t.to_lowercase()).collect()
}

/// Scores every span directly from its text.
pub struct BruteBm25 {
    docs: Vec<(u64, BTreeMap<String, u32>, usize)>,
    df: BTreeMap<String, u64>,
    avgdl: f64,
}

impl BruteBm25 {
    pub fn new(spans: &[SpanRecord]) -> Self {
        let mut df: BTreeMap<String, u64> = BTreeMap::new();
        let mut docs = Vec::new();
        let mut total = 0usize;
        for s in spans {
            let toks = oracle_tokens(&s.text);
            total += toks.len();
            let mut tf = BTreeMap::new();
            for t in &toks {
                *tf.entry(t.clone()).or_insert(0u32) += 1;
            }
            for t in tf.keys() {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
            docs.push((s.span_id, tf, toks.len()));
        }
        let avgdl = total as f64 / spans.len() as f64;
        Self { docs, df, avgdl }
    }

    pub fn score(&self, doc: usize, terms: &BTreeSet<String>) -> f64 {
        let n = self.docs.len() as f64;
        let (_, tf, len) = &self.docs[doc];
        let mut s = 0.0;
        for t in terms {
            let Some(&f) = tf.get(t) else { continue };
            let df = self.df[t] as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let f = f as f64;
            let norm = 1.0 - B + B * *len as f64 / self.avgdl;
            s += idf * (f * (K1 + 1.0) / (f + K1 * norm));
        }
        s
    }

    pub fn contains_all(&self, doc: usize, terms: &BTreeSet<String>) -> bool {
        terms.iter().all(|t| self.docs[doc].1.contains_key(t))
    }

    /// Ranked `(span_id, score)` over positive scores, ties by id.
    pub fn top(&self, query: &str, n: usize, required: &BTreeSet<String>) -> Vec<(u64, f64)> {
        let q: BTreeSet<String> = oracle_tokens(query).into_iter().collect();
        let scoring: BTreeSet<String> = q.union(required).cloned().collect();
        let mut hits: Vec<(u64, f64)> = (0..self.docs.len())
            .filter(|&d| self.contains_all(d, required))
            .filter(|&d| required.is_empty() || q.is_empty() || q.iter().any(|t| self.docs[d].1.contains_key(t)))
            .map(|d| (self.docs[d].0, self.score(d, &scoring)))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        hits.truncate(n);
        hits
    }
}

pub fn brute_cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Exact top-`k` ids by cosine, ties by id.
pub fn brute_knn(engine: &Engine, q: &[f32], k: usize) -> Vec<u64> {
    let mut all: Vec<(u64, f64)> =
        engine.embeddings().iter().map(|(id, v)| (id, brute_cosine(q, v.as_slice()))).collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.into_iter().take(k).map(|(id, _)| id).collect()
}
