use std::collections::{BTreeSet, HashMap, HashSet};

use super::{idf, rank_top_n, tokenize, Bm25Params, LexicalError, Posting, ScoredSpan};
use crate::corpus::{SectionKind, SpanRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct DocEntry {
    pub(crate) length: u32,
    pub(crate) kind: SectionKind,
}

/// Mutable build phase of the index. Call [`finalize`](Self::finalize) to
/// get a read-only [`LexicalIndex`].
#[derive(Debug, Clone)]
pub struct LexicalIndexBuilder {
    params: Bm25Params,
    postings: HashMap<String, Vec<Posting>>,
    docs: HashMap<u64, DocEntry>,
    total_length: u64,
}

impl LexicalIndexBuilder {
    pub fn new(params: Bm25Params) -> Result<Self, LexicalError> {
        params.validate()?;
        Ok(Self { params, postings: HashMap::new(), docs: HashMap::new(), total_length: 0 })
    }

    pub fn add(&mut self, span: &SpanRecord) -> Result<(), LexicalError> {
        self.add_text(span.span_id, span.kind, &span.text)
    }

    pub fn add_text(&mut self, span_id: u64, kind: SectionKind, text: &str) -> Result<(), LexicalError> {
        if self.docs.contains_key(&span_id) {
            return Err(LexicalError::DuplicateSpan(span_id));
        }
        let tokens = tokenize(text);
        let mut counts: HashMap<String, u32> = HashMap::new();
        for t in tokens.iter() {
            *counts.entry(t.clone()).or_insert(0) += 1;
        }
        for (term, tf) in counts {
            self.postings.entry(term).or_default().push(Posting { span_id, term_frequency: tf });
        }
        self.docs.insert(span_id, DocEntry { length: tokens.len() as u32, kind });
        self.total_length += tokens.len() as u64;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        avgdl(self.total_length, self.docs.len())
    }

    pub fn finalize(mut self) -> LexicalIndex {
        for list in self.postings.values_mut() {
            list.sort_unstable_by_key(|p| p.span_id);
        }
        LexicalIndex { params: self.params, postings: self.postings, docs: self.docs, total_length: self.total_length }
    }
}

fn avgdl(total: u64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total as f64 / n as f64
    }
}

/// Immutable inverted index; safe to share between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct LexicalIndex {
    params: Bm25Params,
    postings: HashMap<String, Vec<Posting>>,
    docs: HashMap<u64, DocEntry>,
    total_length: u64,
}

impl LexicalIndex {
    /// Builds an index over `spans` in one go.
    pub fn build<'a, I>(params: Bm25Params, spans: I) -> Result<Self, LexicalError>
    where
        I: IntoIterator<Item = &'a SpanRecord>,
    {
        let mut builder = LexicalIndexBuilder::new(params)?;
        for span in spans {
            builder.add(span)?;
        }
        Ok(builder.finalize())
    }

    pub(crate) fn from_parts(
        params: Bm25Params,
        postings: HashMap<String, Vec<Posting>>,
        docs: HashMap<u64, DocEntry>,
    ) -> Self {
        let total_length = docs.values().map(|d| d.length as u64).sum();
        Self { params, postings, docs, total_length }
    }

    pub(crate) fn docs(&self) -> &HashMap<u64, DocEntry> {
        &self.docs
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    /// Number of indexed spans (`N`).
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn avgdl(&self) -> f64 {
        avgdl(self.total_length, self.docs.len())
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_frequency(&self, term: &str) -> u64 {
        self.postings(term).len() as u64
    }

    pub fn doc_length(&self, span_id: u64) -> Option<u32> {
        self.docs.get(&span_id).map(|d| d.length)
    }

    pub fn kind(&self, span_id: u64) -> Option<SectionKind> {
        self.docs.get(&span_id).map(|d| d.kind)
    }

    pub fn term_frequency(&self, term: &str, span_id: u64) -> u32 {
        let list = self.postings(term);
        list.binary_search_by_key(&span_id, |p| p.span_id).map(|i| list[i].term_frequency).unwrap_or(0)
    }

    fn contains(&self, term: &str, span_id: u64) -> bool {
        self.term_frequency(term, span_id) > 0
    }

    fn term_score(&self, term: &str, tf: u32, doc_len: u32) -> f64 {
        let weight = idf(self.doc_frequency(term), self.len() as u64);
        self.params.term_score(weight, tf as f64, doc_len as f64, self.avgdl())
    }

    /// BM25 score of one span against a set of query terms.
    pub fn bm25_score(&self, query_terms: &BTreeSet<String>, span_id: u64) -> Result<f64, LexicalError> {
        let doc = self.docs.get(&span_id).ok_or(LexicalError::UnknownSpan(span_id))?;
        let mut score = 0.0;
        for term in query_terms {
            let tf = self.term_frequency(term, span_id);
            if tf > 0 {
                score += self.term_score(term, tf, doc.length);
            }
        }
        Ok(score)
    }

    /// Top-`n` spans for `query_text`.
    ///
    /// Candidates are spans containing at least one query token and every
    /// required term; they are scored over the union of both term sets.
    /// When the query text has no tokens the required terms act as the
    /// query.
    pub fn search(
        &self,
        query_text: &str,
        n: usize,
        required_terms: &BTreeSet<String>,
    ) -> Result<Vec<ScoredSpan>, LexicalError> {
        self.search_filtered(query_text, n, required_terms, None)
    }

    /// [`search`](Self::search) restricted to spans of one section kind.
    pub fn search_filtered(
        &self,
        query_text: &str,
        n: usize,
        required_terms: &BTreeSet<String>,
        kind: Option<SectionKind>,
    ) -> Result<Vec<ScoredSpan>, LexicalError> {
        if n == 0 {
            return Err(LexicalError::ZeroResults);
        }
        let query: BTreeSet<String> = tokenize(query_text).into_iter().collect();
        let required = super::term_set(required_terms);
        if query.is_empty() && required.is_empty() {
            return Err(LexicalError::EmptyQuery);
        }
        let scoring: BTreeSet<String> = query.union(&required).cloned().collect();
        let kind_ok = |id: u64| kind.is_none_or(|k| self.kind(id) == Some(k));

        let allowed: Option<HashSet<u64>> = if required.is_empty() {
            None
        } else {
            Some(self.required_candidates(&required, &query).into_iter().filter(|&id| kind_ok(id)).collect())
        };

        let mut acc: HashMap<u64, f64> = HashMap::new();
        for term in &scoring {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let weight = idf(list.len() as u64, self.len() as u64);
            let avgdl = self.avgdl();
            for p in list {
                let keep = match &allowed {
                    Some(set) => set.contains(&p.span_id),
                    None => kind_ok(p.span_id),
                };
                if !keep {
                    continue;
                }
                let dl = self.docs[&p.span_id].length as f64;
                *acc.entry(p.span_id).or_insert(0.0) +=
                    self.params.term_score(weight, p.term_frequency as f64, dl, avgdl);
            }
        }
        let hits = acc.into_iter().filter(|(_, s)| *s > 0.0).collect();
        Ok(rank_top_n(hits, n))
    }

    /// Spans containing every required term and, if the query has tokens,
    /// at least one of them.
    fn required_candidates(&self, required: &BTreeSet<String>, query: &BTreeSet<String>) -> Vec<u64> {
        let Some(shortest) = required.iter().min_by_key(|t| self.postings(t).len()) else {
            return Vec::new();
        };
        self.postings(shortest)
            .iter()
            .map(|p| p.span_id)
            .filter(|&id| required.iter().all(|t| t == shortest || self.contains(t, id)))
            .filter(|&id| query.is_empty() || query.iter().any(|t| self.contains(t, id)))
            .collect()
    }
}
