//! Patent corpus handling: TSV ingestion, span segmentation and the
//! training-dataset emitters.
//!
//! A patent is read as a list of sections (title, abstract, figure
//! descriptions, claims). Every section is cut into short spans which are
//! the atomic unit of retrieval for the rest of the crate.

mod emit;
mod split;
mod tsv;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use emit::{all_tags, emit_bert_dataset, emit_gpt2_dataset, EmissionStats, MetadataMapping, DEP_TAG, SPAN_TAG};
pub use split::split_spans;
pub use tsv::{parse_tsv, ParseOutcome, RowError, RowErrorKind, TsvSchema};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("section text is empty or whitespace-only")]
    EmptySection,
    #[error("unknown section kind `{0}`")]
    UnknownKind(String),
    #[error("unknown metadata mapping `{0}`")]
    UnknownMapping(String),
    #[error("mapping figure2title is reserved and never emitted")]
    ReservedMapping,
    #[error("header is missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("input has no header line")]
    MissingHeader,
    #[error("patent {patent_id}: {source}")]
    Document {
        patent_id: String,
        #[source]
        source: Box<CorpusError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Structural kind of a section of patent text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Title,
    Abstract,
    Figure,
    IndependentClaim,
    DependentClaim,
}

impl SectionKind {
    pub const ALL: [SectionKind; 5] = [
        SectionKind::Title,
        SectionKind::Abstract,
        SectionKind::Figure,
        SectionKind::IndependentClaim,
        SectionKind::DependentClaim,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::Title => "title",
            SectionKind::Abstract => "abstract",
            SectionKind::Figure => "figure",
            SectionKind::IndependentClaim => "independent_claim",
            SectionKind::DependentClaim => "dependent_claim",
        }
    }

    /// One-letter code used in human-readable listings, e.g. `A-4` for the
    /// fifth abstract span.
    pub fn code(self) -> char {
        match self {
            SectionKind::Title => 'T',
            SectionKind::Abstract => 'A',
            SectionKind::Figure => 'F',
            SectionKind::IndependentClaim => 'C',
            SectionKind::DependentClaim => 'D',
        }
    }

    pub fn is_claim(self) -> bool {
        matches!(self, SectionKind::IndependentClaim | SectionKind::DependentClaim)
    }

    /// Titles and abstracts may occur at most once per patent.
    pub fn is_singular(self) -> bool {
        matches!(self, SectionKind::Title | SectionKind::Abstract)
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectionKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SectionKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| CorpusError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub kind: SectionKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatentDocument {
    pub patent_id: String,
    pub sections: Vec<Section>,
}

impl PatentDocument {
    pub fn new(patent_id: impl Into<String>) -> Self {
        Self { patent_id: patent_id.into(), sections: Vec::new() }
    }

    pub fn with_section(mut self, kind: SectionKind, text: impl Into<String>) -> Self {
        self.sections.push(Section { kind, text: text.into() });
        self
    }

    /// First section of the given kind, if any.
    pub fn section(&self, kind: SectionKind) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == kind)
    }
}

/// One indexed unit of patent text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub span_id: u64,
    pub patent_id: String,
    pub kind: SectionKind,
    /// Position of the span among all spans of `kind` within the patent.
    pub ordinal: u32,
    pub text: String,
}

impl SpanRecord {
    /// Listing label such as `A-4`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.kind.code(), self.ordinal)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestOutput {
    pub spans: Vec<SpanRecord>,
    pub spans_by_kind: BTreeMap<SectionKind, usize>,
}

/// Flattens documents into span records with dense ids assigned in input
/// order.
pub fn ingest(documents: &[PatentDocument]) -> Result<IngestOutput, CorpusError> {
    let mut out = IngestOutput::default();
    for doc in documents {
        let mut ordinals: BTreeMap<SectionKind, u32> = BTreeMap::new();
        for section in &doc.sections {
            let pieces = split_spans(&section.text, section.kind)
                .map_err(|e| CorpusError::Document { patent_id: doc.patent_id.clone(), source: Box::new(e) })?;
            let next = ordinals.entry(section.kind).or_insert(0);
            for text in pieces {
                out.spans.push(SpanRecord {
                    span_id: out.spans.len() as u64,
                    patent_id: doc.patent_id.clone(),
                    kind: section.kind,
                    ordinal: *next,
                    text,
                });
                *next += 1;
                *out.spans_by_kind.entry(section.kind).or_insert(0) += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for kind in SectionKind::ALL {
            assert_eq!(kind.as_str().parse::<SectionKind>().unwrap(), kind);
        }
        assert!("claim".parse::<SectionKind>().is_err());
    }

    #[test]
    fn ingest_title_and_two_sentence_abstract() {
        let doc = PatentDocument::new("p1")
            .with_section(SectionKind::Title, "Wireless apparatus")
            .with_section(SectionKind::Abstract, "An apparatus is provided. The apparatus detects networks.");
        let out = ingest(&[doc]).unwrap();
        let got: Vec<_> = out.spans.iter().map(|s| (s.span_id, s.kind, s.ordinal)).collect();
        assert_eq!(
            got,
            vec![(0, SectionKind::Title, 0), (1, SectionKind::Abstract, 0), (2, SectionKind::Abstract, 1),]
        );
        assert_eq!(out.spans_by_kind[&SectionKind::Abstract], 2);
        assert_eq!(out.spans[2].label(), "A-1");
    }

    #[test]
    fn ingest_empty() {
        let out = ingest(&[]).unwrap();
        assert!(out.spans.is_empty());
    }

    #[test]
    fn duplicate_sentences_are_kept() {
        let doc = PatentDocument::new("p1").with_section(SectionKind::Abstract, "A thing is shown. A thing is shown.");
        let out = ingest(&[doc]).unwrap();
        assert_eq!(out.spans.len(), 2);
        assert_eq!(out.spans[0].text, out.spans[1].text);
        assert_ne!(out.spans[0].span_id, out.spans[1].span_id);
    }

    #[test]
    fn ordinals_continue_across_sections_of_same_kind() {
        let doc = PatentDocument::new("p1")
            .with_section(SectionKind::IndependentClaim, "A device comprising: a sensor.")
            .with_section(SectionKind::IndependentClaim, "A method comprising: sensing.");
        let out = ingest(&[doc]).unwrap();
        let ords: Vec<u32> = out.spans.iter().map(|s| s.ordinal).collect();
        assert_eq!(ords, vec![0, 1, 2, 3]);
    }

    #[test]
    fn whitespace_section_fails_with_patent_context() {
        let doc = PatentDocument::new("p9").with_section(SectionKind::Title, "  \t ");
        let err = ingest(&[doc]).unwrap_err();
        assert!(err.to_string().contains("p9"));
    }
}
