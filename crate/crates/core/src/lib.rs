//! Patent prior-art search: span ingestion, BM25 retrieval, embedding
//! rerank and an approximate nearest-neighbour forest.

pub mod ann;
pub mod corpus;
pub mod embedding;
pub mod lexical;
pub mod pipeline;
pub mod storage;

pub use pipeline::{Engine, Query, RerankResult, SearchMode};
