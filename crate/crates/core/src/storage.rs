//! On-disk index directory.
//!
//! ```text
//! index_dir/
//!   manifest.json    format version, corpus statistics, sha256 per file
//!   spans.bin        span records
//!   postings.bin     document table and postings lists
//!   embeddings.bin   span vectors
//!   forest.ann       ANN forest (own header and checksum)
//! ```
//!
//! All integers are little-endian. Strings are a `u32` byte length followed
//! by UTF-8 bytes.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Cursor, Read};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ann::{ann_load, ann_save, AnnError, AnnParams};
use crate::corpus::{SectionKind, SpanRecord};
use crate::embedding::{
    Embedder, EmbedderDescriptor, EmbedderKind, EmbeddingStore, EmbeddingVector, HashEmbedder, LookupEmbedder,
};
use crate::lexical::{Bm25Params, DocEntry, LexicalIndex, Posting};
use crate::pipeline::Engine;

pub const INDEX_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPANS_FILE: &str = "spans.bin";
pub const POSTINGS_FILE: &str = "postings.bin";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const FOREST_FILE: &str = "forest.ann";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("not a recognised file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("unexpected end of data")]
    Truncated,
    #[error("checksum mismatch in {0}")]
    ChecksumMismatch(String),
    #[error("corrupt data: {0}")]
    Corrupt(String),
    #[error("manifest: {0}")]
    Manifest(String),
}

impl PersistError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        PersistError::Io { path: path.to_path_buf(), source }
    }
}

pub(crate) fn sha256(bytes: &[u8]) -> [u8; 32] {
    let digest = Sha256::digest(bytes);
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    out
}

pub(crate) fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.write_u32::<LE>(s.len() as u32).unwrap();
    buf.extend_from_slice(s.as_bytes());
}

/// Cursor over a byte slice whose reads fail with [`PersistError::Truncated`].
pub(crate) struct Reader<'a>(Cursor<&'a [u8]>);

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self(Cursor::new(bytes))
    }

    pub(crate) fn u8(&mut self) -> Result<u8, PersistError> {
        self.0.read_u8().map_err(|_| PersistError::Truncated)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, PersistError> {
        self.0.read_u32::<LE>().map_err(|_| PersistError::Truncated)
    }

    pub(crate) fn u64(&mut self) -> Result<u64, PersistError> {
        self.0.read_u64::<LE>().map_err(|_| PersistError::Truncated)
    }

    pub(crate) fn f32(&mut self) -> Result<f32, PersistError> {
        self.0.read_f32::<LE>().map_err(|_| PersistError::Truncated)
    }

    pub(crate) fn f64(&mut self) -> Result<f64, PersistError> {
        self.0.read_f64::<LE>().map_err(|_| PersistError::Truncated)
    }

    pub(crate) fn bytes(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        let start = self.0.position() as usize;
        let all = *self.0.get_ref();
        let end = start.checked_add(n).filter(|&e| e <= all.len()).ok_or(PersistError::Truncated)?;
        self.0.set_position(end as u64);
        Ok(&all[start..end])
    }

    pub(crate) fn string(&mut self) -> Result<String, PersistError> {
        let n = self.u32()? as usize;
        let bytes = self.bytes(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| PersistError::Corrupt("invalid UTF-8".into()))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.0.get_ref().len() - self.0.position() as usize
    }

    /// Guards length prefixes against absurd allocations on corrupt input.
    pub(crate) fn count(&mut self, min_item_bytes: usize) -> Result<usize, PersistError> {
        let n = self.u64()? as usize;
        if n.saturating_mul(min_item_bytes.max(1)) > self.remaining() {
            return Err(PersistError::Truncated);
        }
        Ok(n)
    }

    pub(crate) fn finish(&self) -> Result<(), PersistError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(PersistError::Corrupt(format!("{n} trailing bytes"))),
        }
    }
}

fn kind_code(kind: SectionKind) -> u8 {
    SectionKind::ALL.iter().position(|k| *k == kind).unwrap() as u8
}

fn kind_from_code(code: u8) -> Result<SectionKind, PersistError> {
    SectionKind::ALL
        .get(code as usize)
        .copied()
        .ok_or_else(|| PersistError::Corrupt(format!("section kind code {code}")))
}

pub fn encode_spans(spans: &[SpanRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.write_u64::<LE>(spans.len() as u64).unwrap();
    for s in spans {
        buf.write_u64::<LE>(s.span_id).unwrap();
        put_str(&mut buf, &s.patent_id);
        buf.write_u8(kind_code(s.kind)).unwrap();
        buf.write_u32::<LE>(s.ordinal).unwrap();
        put_str(&mut buf, &s.text);
    }
    buf
}

pub fn decode_spans(bytes: &[u8]) -> Result<Vec<SpanRecord>, PersistError> {
    let mut r = Reader::new(bytes);
    let n = r.count(21)?;
    let mut spans = Vec::with_capacity(n);
    for _ in 0..n {
        spans.push(SpanRecord {
            span_id: r.u64()?,
            patent_id: r.string()?,
            kind: kind_from_code(r.u8()?)?,
            ordinal: r.u32()?,
            text: r.string()?,
        });
    }
    r.finish()?;
    Ok(spans)
}

/// Postings file: the document table, then terms in sorted order so the
/// bytes are reproducible.
pub fn encode_postings(index: &LexicalIndex) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut docs: Vec<_> = index.docs().iter().collect();
    docs.sort_unstable_by_key(|(id, _)| **id);
    buf.write_u64::<LE>(docs.len() as u64).unwrap();
    for (id, doc) in docs {
        buf.write_u64::<LE>(*id).unwrap();
        buf.write_u32::<LE>(doc.length).unwrap();
        buf.write_u8(kind_code(doc.kind)).unwrap();
    }
    let mut terms: Vec<&str> = index.terms().collect();
    terms.sort_unstable();
    buf.write_u64::<LE>(terms.len() as u64).unwrap();
    for term in terms {
        put_str(&mut buf, term);
        let list = index.postings(term);
        buf.write_u32::<LE>(list.len() as u32).unwrap();
        for p in list {
            buf.write_u64::<LE>(p.span_id).unwrap();
            buf.write_u32::<LE>(p.term_frequency).unwrap();
        }
    }
    buf
}

pub fn decode_postings(bytes: &[u8], params: Bm25Params) -> Result<LexicalIndex, PersistError> {
    let mut r = Reader::new(bytes);
    let n_docs = r.count(13)?;
    let mut docs = HashMap::with_capacity(n_docs);
    for _ in 0..n_docs {
        let id = r.u64()?;
        let entry = DocEntry { length: r.u32()?, kind: kind_from_code(r.u8()?)? };
        if docs.insert(id, entry).is_some() {
            return Err(PersistError::Corrupt(format!("duplicate span {id} in document table")));
        }
    }
    let n_terms = r.count(8)?;
    let mut postings = HashMap::with_capacity(n_terms);
    for _ in 0..n_terms {
        let term = r.string()?;
        let n = r.u32()? as usize;
        let mut list: Vec<Posting> = Vec::with_capacity(n.min(r.remaining() / 12));
        for _ in 0..n {
            let p = Posting { span_id: r.u64()?, term_frequency: r.u32()? };
            if !docs.contains_key(&p.span_id) || p.term_frequency == 0 {
                return Err(PersistError::Corrupt(format!("bad posting for `{term}`")));
            }
            if list.last().is_some_and(|last| last.span_id >= p.span_id) {
                return Err(PersistError::Corrupt(format!("postings for `{term}` out of order")));
            }
            list.push(p);
        }
        postings.insert(term, list);
    }
    r.finish()?;
    Ok(LexicalIndex::from_parts(params, postings, docs))
}

pub fn encode_embeddings(store: &EmbeddingStore) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.write_u32::<LE>(store.dim() as u32).unwrap();
    buf.write_u64::<LE>(store.len() as u64).unwrap();
    for (id, v) in store.iter() {
        buf.write_u64::<LE>(id).unwrap();
        for c in v.as_slice() {
            buf.write_f32::<LE>(*c).unwrap();
        }
    }
    buf
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingStore, PersistError> {
    let mut r = Reader::new(bytes);
    let dim = r.u32()? as usize;
    let mut store = EmbeddingStore::new(dim).map_err(|e| PersistError::Corrupt(e.to_string()))?;
    let n = r.count(8 + 4 * dim)?;
    for _ in 0..n {
        let id = r.u64()?;
        let components = (0..dim).map(|_| r.f32()).collect::<Result<Vec<f32>, _>>()?;
        let v = EmbeddingVector::new(components).map_err(|e| PersistError::Corrupt(e.to_string()))?;
        store.insert(id, v).map_err(|e| PersistError::Corrupt(e.to_string()))?;
    }
    r.finish()?;
    Ok(store)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub avgdl: f64,
    pub k1: f64,
    pub b: f64,
    pub span_count: usize,
    pub term_count: usize,
    pub embedder: EmbedderDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ann: Option<AnnParams>,
    /// File name to lowercase hex sha256.
    pub checksums: BTreeMap<String, String>,
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<String, PersistError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| PersistError::io(&path, e))?;
    Ok(hex::encode(sha256(bytes)))
}

/// Writes every component of `engine` under `dir` (created if missing).
pub fn save_index(engine: &Engine, dir: &Path) -> Result<Manifest, PersistError> {
    fs::create_dir_all(dir).map_err(|e| PersistError::io(dir, e))?;
    let mut checksums = BTreeMap::new();
    checksums.insert(SPANS_FILE.to_string(), write_file(dir, SPANS_FILE, &encode_spans(engine.spans()))?);
    checksums.insert(POSTINGS_FILE.to_string(), write_file(dir, POSTINGS_FILE, &encode_postings(engine.lexical()))?);
    checksums.insert(
        EMBEDDINGS_FILE.to_string(),
        write_file(dir, EMBEDDINGS_FILE, &encode_embeddings(engine.embeddings()))?,
    );
    if let Some(forest) = engine.forest() {
        checksums.insert(FOREST_FILE.to_string(), write_file(dir, FOREST_FILE, &ann_save(forest))?);
    }
    let lexical = engine.lexical();
    let params = lexical.params();
    let manifest = Manifest {
        format_version: INDEX_FORMAT_VERSION,
        n: lexical.len(),
        avgdl: lexical.avgdl(),
        k1: params.k1,
        b: params.b,
        span_count: engine.spans().len(),
        term_count: lexical.term_count(),
        embedder: engine.embedder().descriptor(),
        ann: engine.forest().map(|f| f.params()),
        checksums,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| PersistError::Manifest(e.to_string()))?;
    write_file(dir, MANIFEST_FILE, &json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, PersistError> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| PersistError::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| PersistError::Manifest(e.to_string()))?;
    let version = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if version != INDEX_FORMAT_VERSION {
        return Err(PersistError::UnsupportedVersion { found: version, supported: INDEX_FORMAT_VERSION });
    }
    serde_json::from_value(value).map_err(|e| PersistError::Manifest(e.to_string()))
}

fn read_checked(dir: &Path, manifest: &Manifest, name: &str) -> Result<Vec<u8>, PersistError> {
    let expected = manifest
        .checksums
        .get(name)
        .ok_or_else(|| PersistError::Manifest(format!("no checksum recorded for {name}")))?;
    let path = dir.join(name);
    let mut bytes = Vec::new();
    fs::File::open(&path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| PersistError::io(&path, e))?;
    if hex::encode(sha256(&bytes)) != *expected {
        return Err(PersistError::ChecksumMismatch(name.to_string()));
    }
    Ok(bytes)
}

/// Loads an index directory written by [`save_index`], verifying the format
/// version and every file checksum.
pub fn load_index(dir: &Path) -> Result<Engine, PersistError> {
    let manifest = read_manifest(dir)?;
    let params = Bm25Params { k1: manifest.k1, b: manifest.b };
    params.validate().map_err(|e| PersistError::Manifest(e.to_string()))?;
    let spans = decode_spans(&read_checked(dir, &manifest, SPANS_FILE)?)?;
    let lexical = decode_postings(&read_checked(dir, &manifest, POSTINGS_FILE)?, params)?;
    let embeddings = decode_embeddings(&read_checked(dir, &manifest, EMBEDDINGS_FILE)?)?;
    let forest = if manifest.checksums.contains_key(FOREST_FILE) {
        let bytes = read_checked(dir, &manifest, FOREST_FILE)?;
        Some(ann_load(&bytes).map_err(|e| match e {
            AnnError::Persist(p) => p,
            other => PersistError::Corrupt(other.to_string()),
        })?)
    } else {
        None
    };
    if lexical.len() != manifest.n || spans.len() != manifest.span_count {
        return Err(PersistError::Manifest("span counts disagree with manifest".into()));
    }
    let embedder: Arc<dyn Embedder> = match manifest.embedder.kind {
        EmbedderKind::Hash => {
            Arc::new(HashEmbedder::new(manifest.embedder.dim).map_err(|e| PersistError::Manifest(e.to_string()))?)
        }
        EmbedderKind::File => Arc::new(LookupEmbedder::new(&embeddings, &spans)),
    };
    Engine::new(spans, lexical, embeddings, forest, embedder).map_err(|e| PersistError::Corrupt(e.to_string()))
}
