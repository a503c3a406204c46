use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;

use super::{CorpusError, PatentDocument, Section, SectionKind};

/// Column names looked up in the header row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TsvSchema {
    pub patent_id: String,
    pub kind: String,
    pub text: String,
}

impl Default for TsvSchema {
    fn default() -> Self {
        Self { patent_id: "patent_id".into(), kind: "kind".into(), text: "text".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowErrorKind {
    ColumnCount { expected: usize, found: usize },
    UnknownKind(String),
    EmptyPatentId,
    DuplicateSection(SectionKind),
}

/// A recoverable problem with one input row; the row is dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the input, header included.
    pub line: usize,
    pub kind: RowErrorKind,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match &self.kind {
            RowErrorKind::ColumnCount { expected, found } => {
                write!(f, "expected {expected} columns, found {found}")
            }
            RowErrorKind::UnknownKind(k) => write!(f, "unknown section kind `{k}`"),
            RowErrorKind::EmptyPatentId => f.write_str("empty patent_id"),
            RowErrorKind::DuplicateSection(k) => write!(f, "duplicate {k} section for patent"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseOutcome {
    pub documents: Vec<PatentDocument>,
    pub errors: Vec<RowError>,
    /// Rows dropped because their text was blank.
    pub skipped_rows: usize,
}

/// Reads a tab-separated corpus. Documents come out in order of first
/// appearance of their patent id, sections in file order.
///
/// Fails outright only on I/O errors (including invalid UTF-8) and on a
/// missing or incomplete header; bad rows are collected in
/// [`ParseOutcome::errors`].
pub fn parse_tsv<R: BufRead>(reader: R, schema: &TsvSchema) -> Result<ParseOutcome, CorpusError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(CorpusError::MissingHeader),
    };
    let header = trim_eol(header.strip_prefix('\u{feff}').unwrap_or(&header));
    let columns: Vec<&str> = header.split('\t').collect();
    let position = |name: &str, label: &'static str| {
        columns.iter().position(|c| *c == name).ok_or(CorpusError::MissingColumn(label))
    };
    let id_col = position(&schema.patent_id, "patent_id")?;
    let kind_col = position(&schema.kind, "kind")?;
    let text_col = position(&schema.text, "text")?;

    let mut out = ParseOutcome::default();
    let mut by_id: HashMap<String, usize> = HashMap::new();

    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        let line = trim_eol(&line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let row_err = |kind| RowError { line: line_no, kind };
        if fields.len() != columns.len() {
            out.errors.push(row_err(RowErrorKind::ColumnCount { expected: columns.len(), found: fields.len() }));
            continue;
        }
        let patent_id = fields[id_col].trim();
        if patent_id.is_empty() {
            out.errors.push(row_err(RowErrorKind::EmptyPatentId));
            continue;
        }
        let kind: SectionKind = match fields[kind_col].trim().parse() {
            Ok(k) => k,
            Err(_) => {
                out.errors.push(row_err(RowErrorKind::UnknownKind(fields[kind_col].to_string())));
                continue;
            }
        };
        let text = fields[text_col].trim();
        if text.is_empty() {
            out.skipped_rows += 1;
            continue;
        }

        let slot = *by_id.entry(patent_id.to_string()).or_insert_with(|| {
            out.documents.push(PatentDocument::new(patent_id));
            out.documents.len() - 1
        });
        let doc = &mut out.documents[slot];
        if kind.is_singular() && doc.section(kind).is_some() {
            out.errors.push(row_err(RowErrorKind::DuplicateSection(kind)));
            continue;
        }
        doc.sections.push(Section { kind, text: text.to_string() });
    }
    Ok(out)
}

fn trim_eol(line: &str) -> &str {
    line.strip_suffix('\r').unwrap_or(line)
}
