//! Vector storage and the text vector-file format, where `<TAB>` is a tab:
//!
//! ```text
//! #dim=4
//! 0<TAB>0.1,0.2,0.3,0.4
//! 7<TAB>1,0,0,0
//! ```

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use super::{Embedder, EmbedderDescriptor, EmbedderKind, EmbeddingError, EmbeddingVector};
use crate::corpus::SpanRecord;

/// Span vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<u64, EmbeddingVector>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self, EmbeddingError> {
        if dim < 2 {
            return Err(EmbeddingError::InvalidDim(dim));
        }
        Ok(Self { dim, vectors: BTreeMap::new() })
    }

    /// Embeds every span with `embedder`.
    pub fn from_spans<'a, I>(embedder: &dyn Embedder, spans: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = &'a SpanRecord>,
    {
        let mut store = Self::new(embedder.dim())?;
        for span in spans {
            store.insert(span.span_id, embedder.embed(&span.text))?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, span_id: u64, vector: EmbeddingVector) -> Result<(), EmbeddingError> {
        if vector.dim() != self.dim {
            return Err(EmbeddingError::DimensionMismatch { expected: self.dim, found: vector.dim() });
        }
        if self.vectors.contains_key(&span_id) {
            return Err(EmbeddingError::DuplicateSpan(span_id));
        }
        self.vectors.insert(span_id, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, span_id: u64) -> Option<&EmbeddingVector> {
        self.vectors.get(&span_id)
    }

    /// Vectors in ascending span id order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &EmbeddingVector)> {
        self.vectors.iter().map(|(id, v)| (*id, v))
    }
}

/// Reads the text vector format. Every row is L2-normalized; zero rows and
/// rows whose length disagrees with the header are rejected. Row numbers in
/// errors count data rows from 1.
pub fn load_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingStore, EmbeddingError> {
    let mut store: Option<EmbeddingStore> = None;
    let mut row = 0;
    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let Some(store) = store.as_mut() else {
            let dim = line
                .strip_prefix("#dim=")
                .and_then(|d| d.trim().parse::<usize>().ok())
                .ok_or(EmbeddingError::MissingHeader)?;
            store = Some(EmbeddingStore::new(dim)?);
            continue;
        };
        row += 1;
        let malformed = |message: String| EmbeddingError::Malformed { row, message };
        let (id, values) = line.split_once('\t').ok_or_else(|| malformed("expected `span_id<TAB>values`".into()))?;
        let span_id: u64 = id.trim().parse().map_err(|_| malformed(format!("bad span id `{id}`")))?;
        let components = values
            .split(',')
            .map(|v| v.trim().parse::<f32>().map_err(|_| malformed(format!("bad number `{v}`"))))
            .collect::<Result<Vec<f32>, _>>()?;
        if components.len() != store.dim() {
            return Err(EmbeddingError::RowDimension { row, expected: store.dim(), found: components.len() });
        }
        let vector = EmbeddingVector::new(components).map_err(|_| malformed("non-finite value".into()))?;
        if vector.is_zero() {
            return Err(EmbeddingError::ZeroVector { row });
        }
        store.insert(span_id, vector.normalized()).map_err(|e| match e {
            EmbeddingError::DuplicateSpan(id) => malformed(format!("duplicate span id {id}")),
            other => other,
        })?;
    }
    store.ok_or(EmbeddingError::MissingHeader)
}

/// Writes `store` in the text vector format.
pub fn write_embeddings<W: Write>(store: &EmbeddingStore, sink: &mut W) -> std::io::Result<()> {
    writeln!(sink, "#dim={}", store.dim())?;
    for (id, v) in store.iter() {
        let values: Vec<String> = v.as_slice().iter().map(f32::to_string).collect();
        writeln!(sink, "{id}\t{}", values.join(","))?;
    }
    Ok(())
}

/// Embeds known span texts by lookup into externally computed vectors.
/// Unknown text maps to the zero vector.
#[derive(Debug, Clone)]
pub struct LookupEmbedder {
    dim: usize,
    by_text: HashMap<String, EmbeddingVector>,
}

impl LookupEmbedder {
    pub fn new<'a, I>(store: &EmbeddingStore, spans: I) -> Self
    where
        I: IntoIterator<Item = &'a SpanRecord>,
    {
        let mut by_text = HashMap::new();
        for span in spans {
            if let Some(v) = store.get(span.span_id) {
                by_text.entry(span.text.clone()).or_insert_with(|| v.clone());
            }
        }
        Self { dim: store.dim(), by_text }
    }
}

impl Embedder for LookupEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        self.by_text.get(text.trim()).cloned().unwrap_or_else(|| EmbeddingVector::zeros(self.dim))
    }

    fn descriptor(&self) -> EmbedderDescriptor {
        EmbedderDescriptor {
            name: "vector-file".into(),
            kind: EmbedderKind::File,
            dim: self.dim,
            parameters: BTreeMap::new(),
        }
    }
}
