//! Plain-text training-set emitters.
//!
//! The generator format wraps every section in structural tags, marks span
//! boundaries inside claims and abstracts, and adds one line per requested
//! metadata mapping:
//!
//! ```text
//! <|start_of_title|> X <|end_of_title|>
//! <|start_of_title|> X <|end_of_title|> <|title2abstract|> <|start_of_abstract|> Y. <|span|> <|end_of_abstract|>
//! ```
//!
//! The encoder format is one untagged span per line with a blank line
//! between documents.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{split_spans, CorpusError, PatentDocument, Section, SectionKind};

pub const SPAN_TAG: &str = "<|span|>";
pub const DEP_TAG: &str = "<|dep|>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetadataMapping {
    Title2Abstract,
    Abstract2Title,
    Claim2Abstract,
    Abstract2Claim,
    Title2Figure,
    /// Defined for completeness; rejected by [`emit_gpt2_dataset`].
    Figure2Title,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Title,
    Abstract,
    Claim,
    Figure,
}

impl Slot {
    fn find(self, doc: &PatentDocument) -> Option<usize> {
        doc.sections.iter().position(|s| match self {
            Slot::Title => s.kind == SectionKind::Title,
            Slot::Abstract => s.kind == SectionKind::Abstract,
            Slot::Figure => s.kind == SectionKind::Figure,
            Slot::Claim => s.kind.is_claim(),
        })
    }
}

impl MetadataMapping {
    pub const ALL: [MetadataMapping; 6] = [
        MetadataMapping::Title2Abstract,
        MetadataMapping::Abstract2Title,
        MetadataMapping::Claim2Abstract,
        MetadataMapping::Abstract2Claim,
        MetadataMapping::Title2Figure,
        MetadataMapping::Figure2Title,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetadataMapping::Title2Abstract => "title2abstract",
            MetadataMapping::Abstract2Title => "abstract2title",
            MetadataMapping::Claim2Abstract => "claim2abstract",
            MetadataMapping::Abstract2Claim => "abstract2claim",
            MetadataMapping::Title2Figure => "title2figure",
            MetadataMapping::Figure2Title => "figure2title",
        }
    }

    pub fn tag(self) -> String {
        format!("<|{}|>", self.name())
    }

    fn slots(self) -> (Slot, Slot) {
        match self {
            MetadataMapping::Title2Abstract => (Slot::Title, Slot::Abstract),
            MetadataMapping::Abstract2Title => (Slot::Abstract, Slot::Title),
            MetadataMapping::Claim2Abstract => (Slot::Claim, Slot::Abstract),
            MetadataMapping::Abstract2Claim => (Slot::Abstract, Slot::Claim),
            MetadataMapping::Title2Figure => (Slot::Title, Slot::Figure),
            MetadataMapping::Figure2Title => (Slot::Figure, Slot::Title),
        }
    }
}

impl fmt::Display for MetadataMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetadataMapping {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetadataMapping::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CorpusError::UnknownMapping(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionStats {
    pub documents: usize,
    pub spans: usize,
    pub skipped_rows: usize,
}

fn prefix(kind: SectionKind) -> &'static str {
    match kind {
        SectionKind::Title => "<|start_of_title|>",
        SectionKind::Abstract => "<|start_of_abstract|>",
        SectionKind::Figure => "<|start_of_figure|>",
        SectionKind::IndependentClaim => "<|start_of_claim|>",
        SectionKind::DependentClaim => "<|dep|> <|start_of_claim|>",
    }
}

fn appendix(kind: SectionKind) -> &'static str {
    match kind {
        SectionKind::Title => "<|end_of_title|>",
        SectionKind::Abstract => "<|end_of_abstract|>",
        SectionKind::Figure => "<|end_of_figure|>",
        SectionKind::IndependentClaim | SectionKind::DependentClaim => "<|end_of_claim|>",
    }
}

/// Every tag string the generator format can produce.
pub fn all_tags() -> Vec<String> {
    let mut tags: Vec<String> = SectionKind::ALL
        .iter()
        .flat_map(|k| [prefix(*k), appendix(*k)])
        .flat_map(|t| t.split(' '))
        .map(str::to_string)
        .collect();
    tags.push(SPAN_TAG.to_string());
    tags.extend(MetadataMapping::ALL.iter().map(|m| m.tag()));
    tags.sort();
    tags.dedup();
    tags
}

fn tagged(section: &Section) -> Result<(String, usize), CorpusError> {
    let spans = split_spans(&section.text, section.kind)?;
    let mut line = String::from(prefix(section.kind));
    let marks_spans = section.kind == SectionKind::Abstract || section.kind.is_claim();
    for span in &spans {
        line.push(' ');
        line.push_str(span);
        if marks_spans {
            line.push(' ');
            line.push_str(SPAN_TAG);
        }
    }
    line.push(' ');
    line.push_str(appendix(section.kind));
    Ok((line, spans.len()))
}

fn with_patent(patent_id: &str, e: CorpusError) -> CorpusError {
    CorpusError::Document { patent_id: patent_id.to_string(), source: Box::new(e) }
}

/// Writes the tagged generator training text. Mapping lines pair the first
/// section of each side (for `claim`, the first claim of either kind) and
/// are skipped when either side is missing.
pub fn emit_gpt2_dataset<W: Write>(
    documents: &[PatentDocument],
    mappings: &[MetadataMapping],
    sink: &mut W,
) -> Result<EmissionStats, CorpusError> {
    if mappings.contains(&MetadataMapping::Figure2Title) {
        return Err(CorpusError::ReservedMapping);
    }
    let mut stats = EmissionStats::default();
    for doc in documents {
        let mut lines = Vec::with_capacity(doc.sections.len());
        for section in &doc.sections {
            let (line, n) = tagged(section).map_err(|e| with_patent(&doc.patent_id, e))?;
            stats.spans += n;
            lines.push(line);
        }
        for line in &lines {
            writeln!(sink, "{line}")?;
        }
        for mapping in mappings {
            let (from, to) = mapping.slots();
            if let (Some(a), Some(b)) = (from.find(doc), to.find(doc)) {
                writeln!(sink, "{} {} {}", lines[a], mapping.tag(), lines[b])?;
            }
        }
        stats.documents += 1;
    }
    Ok(stats)
}

/// Writes one span per line, untagged, with a single blank line between
/// documents. Documents without spans are skipped entirely.
pub fn emit_bert_dataset<W: Write>(documents: &[PatentDocument], sink: &mut W) -> Result<EmissionStats, CorpusError> {
    let mut stats = EmissionStats::default();
    for doc in documents {
        let mut spans = Vec::new();
        for section in &doc.sections {
            spans.extend(split_spans(&section.text, section.kind).map_err(|e| with_patent(&doc.patent_id, e))?);
        }
        if spans.is_empty() {
            continue;
        }
        if stats.documents > 0 {
            writeln!(sink)?;
        }
        for span in &spans {
            writeln!(sink, "{span}")?;
        }
        stats.documents += 1;
        stats.spans += spans.len();
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gpt2(docs: &[PatentDocument], mappings: &[MetadataMapping]) -> String {
        let mut out = Vec::new();
        emit_gpt2_dataset(docs, mappings, &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    fn bert(docs: &[PatentDocument]) -> String {
        let mut out = Vec::new();
        emit_bert_dataset(docs, &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn title_line() {
        let doc = PatentDocument::new("p").with_section(SectionKind::Title, "X");
        assert_eq!(gpt2(&[doc], &[]), "<|start_of_title|> X <|end_of_title|>\n");
    }

    #[test]
    fn title2abstract_line() {
        let doc =
            PatentDocument::new("p").with_section(SectionKind::Title, "X").with_section(SectionKind::Abstract, "Y.");
        let out = gpt2(&[doc], &[MetadataMapping::Title2Abstract]);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[2],
            "<|start_of_title|> X <|end_of_title|> <|title2abstract|> \
             <|start_of_abstract|> Y. <|span|> <|end_of_abstract|>"
        );
    }

    #[test]
    fn dependent_claim_prefix_and_span_marks() {
        let doc = PatentDocument::new("p")
            .with_section(SectionKind::DependentClaim, "The device of claim 1, wherein: the sensor is optical.");
        assert_eq!(
            gpt2(&[doc], &[]),
            "<|dep|> <|start_of_claim|> The device of claim 1, wherein: <|span|> \
             the sensor is optical. <|span|> <|end_of_claim|>\n"
        );
    }

    #[test]
    fn figure2title_rejected_before_output() {
        let doc = PatentDocument::new("p").with_section(SectionKind::Title, "X");
        let mut out = Vec::new();
        let err =
            emit_gpt2_dataset(&[doc], &[MetadataMapping::Title2Abstract, MetadataMapping::Figure2Title], &mut out)
                .unwrap_err();
        assert!(matches!(err, CorpusError::ReservedMapping));
        assert!(out.is_empty());
    }

    #[test]
    fn mapping_skipped_when_side_missing() {
        let doc = PatentDocument::new("p").with_section(SectionKind::Title, "X");
        let out = gpt2(&[doc], &[MetadataMapping::Title2Abstract, MetadataMapping::Title2Figure]);
        assert_eq!(out.lines().count(), 1);
    }

    #[test]
    fn bert_two_documents() {
        let a = PatentDocument::new("a").with_section(SectionKind::Abstract, "First one. Second one.");
        let b = PatentDocument::new("b").with_section(SectionKind::Title, "Third");
        assert_eq!(bert(&[a, b]), "First one.\nSecond one.\n\nThird\n");
    }

    #[test]
    fn bert_single_document_has_no_blank_line() {
        let a = PatentDocument::new("a").with_section(SectionKind::Title, "Only");
        assert_eq!(bert(&[a]), "Only\n");
    }

    #[test]
    fn bert_keeps_literal_tags() {
        let a = PatentDocument::new("a").with_section(SectionKind::Title, "odd <|span|> title");
        assert_eq!(bert(&[a]), "odd <|span|> title\n");
    }

    #[test]
    fn mapping_names_parse() {
        for m in MetadataMapping::ALL {
            assert_eq!(m.name().parse::<MetadataMapping>().unwrap(), m);
        }
        assert!("claim2title".parse::<MetadataMapping>().is_err());
    }

    fn doc_strategy() -> impl Strategy<Value = PatentDocument> {
        let section = (prop::sample::select(SectionKind::ALL.to_vec()), "[A-Za-z][a-z ;:.]{0,40}");
        ("p[0-9]{1,3}", prop::collection::vec(section, 1..6)).prop_map(|(id, sections)| {
            sections.into_iter().fold(PatentDocument::new(id), |d, (k, t)| d.with_section(k, t))
        })
    }

    proptest! {
        #[test]
        fn gpt2_lines_have_balanced_tags(docs in prop::collection::vec(doc_strategy(), 0..4)) {
            let mappings: Vec<_> = MetadataMapping::ALL[..5].to_vec();
            let out = gpt2(&docs, &mappings);
            for line in out.lines() {
                for name in ["title", "abstract", "figure", "claim"] {
                    let opens = line.matches(&format!("<|start_of_{name}|>")).count();
                    let closes = line.matches(&format!("<|end_of_{name}|>")).count();
                    prop_assert_eq!(opens, closes, "unbalanced {} in {}", name, line);
                }
            }
        }

        #[test]
        fn bert_adds_no_tags(docs in prop::collection::vec(doc_strategy(), 0..4)) {
            let out = bert(&docs);
            for tag in all_tags() {
                prop_assert!(!out.contains(&tag));
            }
            prop_assert!(!out.ends_with("\n\n"));
        }
    }
}
