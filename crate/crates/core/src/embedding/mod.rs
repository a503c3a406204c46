//! Span embeddings and cosine similarity.
//!
//! Embedders are opaque: the engine only needs something that maps text to
//! a fixed-dimension vector. Two are provided, a deterministic feature-hash
//! embedder and a lookup over vectors computed offline.

mod hash;
mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hash::{embed_hash, fnv1a64, HashEmbedder};
pub use store::{load_embeddings, write_embeddings, EmbeddingStore, LookupEmbedder};

pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("row {row}: expected {expected} components, found {found}")]
    RowDimension { row: usize, expected: usize, found: usize },
    #[error("row {row}: zero vector")]
    ZeroVector { row: usize },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("missing `#dim=<d>` header")]
    MissingHeader,
    #[error("embedding dimension must be at least 2, got {0}")]
    InvalidDim(usize),
    #[error("span {0} already has a vector")]
    DuplicateSpan(u64),
    #[error("non-finite component")]
    NonFinite,
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EmbeddingError {
    fn from(e: std::io::Error) -> Self {
        EmbeddingError::Io(e.to_string())
    }
}

/// Fixed-dimension real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(components: Vec<f32>) -> Result<Self, EmbeddingError> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(Self(components))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    /// Scales to unit length. Zero vectors are returned unchanged.
    pub fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            for c in &mut self.0 {
                *c = (*c as f64 / norm) as f32;
            }
        }
        self
    }
}

/// Left-to-right dot product accumulated in f64.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut sum = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        sum += *x as f64 * *y as f64;
    }
    sum
}

/// Cosine similarity; 0.0 when either side is the zero vector.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(cosine_slices(a.as_slice(), b.as_slice()))
}

pub(crate) fn cosine_slices(a: &[f32], b: &[f32]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Hash,
    File,
}

/// Serializable description of the embedder an index was built with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderDescriptor {
    pub name: String,
    pub kind: EmbedderKind,
    pub dim: usize,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
}

impl EmbedderDescriptor {
    pub fn hash(dim: usize) -> Self {
        Self { name: format!("fnv1a-hash-{dim}"), kind: EmbedderKind::Hash, dim, parameters: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim < 2 {
            return Err(EmbeddingError::InvalidDim(self.dim));
        }
        if self.name.is_empty() {
            return Err(EmbeddingError::Malformed { row: 0, message: "empty embedder name".into() });
        }
        Ok(())
    }
}

impl Default for EmbedderDescriptor {
    fn default() -> Self {
        Self::hash(DEFAULT_DIM)
    }
}

/// Text to vector. Implementations must be pure after construction.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> EmbeddingVector;
    fn descriptor(&self) -> EmbedderDescriptor;
}
