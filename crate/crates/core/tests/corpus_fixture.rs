use std::fs;
use std::path::Path;

use priorart_core::corpus::{ingest, parse_tsv, SectionKind, TsvSchema};

fn fixture() -> Vec<u8> {
    fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/five_patents.tsv")).unwrap()
}

#[test]
fn fixture_parses_by_hand_count() {
    let out = parse_tsv(fixture().as_slice(), &TsvSchema::default()).unwrap();
    assert!(out.errors.is_empty());
    assert_eq!(out.skipped_rows, 1);
    let counts: Vec<(&str, usize)> = out.documents.iter().map(|d| (d.patent_id.as_str(), d.sections.len())).collect();
    assert_eq!(counts, vec![("US1000001", 6), ("US1000002", 4), ("US1000003", 2), ("US1000004", 1), ("US1000005", 3)]);
}

#[test]
fn fixture_spans_by_hand_count() {
    let docs = parse_tsv(fixture().as_slice(), &TsvSchema::default()).unwrap().documents;
    let out = ingest(&docs).unwrap();
    assert_eq!(out.spans.len(), 27);
    let per_kind = |k| out.spans_by_kind.get(&k).copied().unwrap_or(0);
    assert_eq!(per_kind(SectionKind::Title), 4);
    assert_eq!(per_kind(SectionKind::Abstract), 9);
    assert_eq!(per_kind(SectionKind::Figure), 3);
    assert_eq!(per_kind(SectionKind::IndependentClaim), 6);
    assert_eq!(per_kind(SectionKind::DependentClaim), 5);
    let ids: Vec<u64> = out.spans.iter().map(|s| s.span_id).collect();
    assert_eq!(ids, (0..27).collect::<Vec<_>>());
    let labels: Vec<String> = out.spans.iter().filter(|s| s.patent_id == "US1000002").map(|s| s.label()).collect();
    assert_eq!(labels, vec!["T-0", "A-0", "A-1", "A-2", "A-3", "F-0", "F-1"]);
    let dep: Vec<u32> = out
        .spans
        .iter()
        .filter(|s| s.patent_id == "US1000001" && s.kind == SectionKind::DependentClaim)
        .map(|s| s.ordinal)
        .collect();
    assert_eq!(dep, vec![0, 1, 2]);
}

#[test]
fn ingest_is_deterministic() {
    let docs = parse_tsv(fixture().as_slice(), &TsvSchema::default()).unwrap().documents;
    assert_eq!(ingest(&docs).unwrap().spans, ingest(&docs).unwrap().spans);
}

#[test]
fn crlf_input_parses_identically() {
    let lf = fixture();
    let crlf = String::from_utf8(lf.clone()).unwrap().replace('\n', "\r\n");
    let a = parse_tsv(lf.as_slice(), &TsvSchema::default()).unwrap();
    let b = parse_tsv(crlf.as_bytes(), &TsvSchema::default()).unwrap();
    assert_eq!(a, b);
}
