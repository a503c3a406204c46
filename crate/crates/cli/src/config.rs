//! Engine configuration: a flat JSON file whose keys are all optional,
//! overridden by command-line flags.
//!
//! ```json
//! {
//!   "index_dir": "index",
//!   "dim": 256,
//!   "vectors": "vectors.tsv",
//!   "k1": 1.2,
//!   "b": 0.75,
//!   "n_trees": 50,
//!   "leaf_capacity": 16,
//!   "seed": 42,
//!   "n_candidates": 100,
//!   "k_final": 10
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use priorart_core::ann::AnnParams;
use priorart_core::embedding::DEFAULT_DIM;
use priorart_core::lexical::Bm25Params;
use priorart_core::pipeline::{DEFAULT_CANDIDATES, DEFAULT_K};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub index_dir: Option<PathBuf>,
    pub dim: Option<usize>,
    pub vectors: Option<PathBuf>,
    pub k1: Option<f64>,
    pub b: Option<f64>,
    pub n_trees: Option<usize>,
    pub leaf_capacity: Option<usize>,
    pub seed: Option<u64>,
    pub n_candidates: Option<usize>,
    pub k_final: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub index_dir: Option<PathBuf>,
    pub dim: usize,
    pub vectors: Option<PathBuf>,
    pub bm25: Bm25Params,
    pub ann: AnnParams,
    pub n_candidates: usize,
    pub k_final: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            index_dir: None,
            dim: DEFAULT_DIM,
            vectors: None,
            bm25: Bm25Params::default(),
            ann: AnnParams::default(),
            n_candidates: DEFAULT_CANDIDATES,
            k_final: DEFAULT_K,
        }
    }
}

impl EngineConfig {
    pub fn from_file(file: ConfigFile) -> Self {
        let d = EngineConfig::default();
        Self {
            index_dir: file.index_dir,
            dim: file.dim.unwrap_or(d.dim),
            vectors: file.vectors,
            bm25: Bm25Params { k1: file.k1.unwrap_or(d.bm25.k1), b: file.b.unwrap_or(d.bm25.b) },
            ann: AnnParams {
                n_trees: file.n_trees.unwrap_or(d.ann.n_trees),
                leaf_capacity: file.leaf_capacity.unwrap_or(d.ann.leaf_capacity),
                seed: file.seed.unwrap_or(d.ann.seed),
            },
            n_candidates: file.n_candidates.unwrap_or(d.n_candidates),
            k_final: file.k_final.unwrap_or(d.k_final),
        }
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => Ok(Self::from_file(ConfigFile::load(p)?)),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.dim < 2 {
            return Err(CliError::usage("dim must be at least 2"));
        }
        if self.n_candidates == 0 || self.k_final == 0 {
            return Err(CliError::usage("n_candidates and k_final must be positive"));
        }
        self.bm25.validate().map_err(|e| CliError::usage(e.to_string()))?;
        self.ann.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(())
    }

    /// The flag (or environment) value wins over the config file.
    pub fn index_dir(&self, flag: Option<&Path>) -> Result<PathBuf, CliError> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.index_dir.clone())
            .ok_or_else(|| CliError::usage("no index directory: pass --index-dir or set PRIORART_INDEX_DIR"))
    }
}
