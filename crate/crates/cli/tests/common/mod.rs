#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn priorart() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_priorart"));
    cmd.env_remove("PRIORART_INDEX_DIR");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    priorart().args(args).output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// Ingests the search fixture with a small forest into `dir/index`.
pub fn build_index(dir: &Path) -> PathBuf {
    let index = dir.join("index");
    let out = run(&[
        "ingest",
        "--tsv",
        fixture("search_corpus.tsv").to_str().unwrap(),
        "--index-dir",
        index.to_str().unwrap(),
        "--n-trees",
        "8",
        "--dim",
        "128",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    index
}
