//! Approximate nearest neighbours over unit vectors with a forest of
//! random-projection trees (angular metric).
//!
//! Each internal node runs a short 2-means over its items on the unit
//! sphere and splits them by the hyperplane through the origin that
//! bisects the two centroids `p` and `q`: normal `(p - q) / |p - q|`.
//! Queries walk all trees best-first from one shared priority
//! queue ordered by distance to the hyperplanes crossed, gather candidates
//! until the budget is reached, then rank them by exact cosine.

mod persist;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::embedding::{cosine_slices, dot, EmbeddingStore, EmbeddingVector};
use crate::lexical::{rank_top_n, ScoredSpan};
use crate::storage::PersistError;

pub use persist::{ann_load, ann_save, ANN_FORMAT_VERSION};

pub const DEFAULT_TREES: usize = 50;
pub const DEFAULT_LEAF_CAPACITY: usize = 16;
pub const DEFAULT_SEED: u64 = 0x5eed_a11c_e5ea_5c4e;

/// Failed splits tolerated before falling back to a balanced split.
const SPLIT_RESAMPLES: usize = 3;
/// Online 2-means updates per split.
const TWO_MEANS_STEPS: usize = 200;
/// Largest side fraction accepted from a 2-means split.
const MAX_IMBALANCE: f64 = 0.95;

#[derive(Debug, Error)]
pub enum AnnError {
    #[error("cannot build a forest over an empty store")]
    EmptyStore,
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: forest has {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Persist(#[from] PersistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AnnParams {
    pub n_trees: usize,
    pub leaf_capacity: usize,
    pub seed: u64,
}

impl Default for AnnParams {
    fn default() -> Self {
        Self { n_trees: DEFAULT_TREES, leaf_capacity: DEFAULT_LEAF_CAPACITY, seed: DEFAULT_SEED }
    }
}

impl AnnParams {
    pub fn validate(&self) -> Result<(), AnnError> {
        if self.n_trees == 0 {
            return Err(AnnError::InvalidParams("n_trees must be at least 1".into()));
        }
        if self.leaf_capacity == 0 {
            return Err(AnnError::InvalidParams("leaf_capacity must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Split { normal: Vec<f32>, offset: f64, left: u32, right: u32 },
    Leaf(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tree {
    pub(crate) nodes: Vec<Node>,
}

/// Query budget. `search_k` caps the number of distinct candidates
/// gathered; `None` means `n_trees * k * 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnQueryBudget {
    pub k: usize,
    pub search_k: Option<usize>,
}

impl AnnQueryBudget {
    pub fn new(k: usize) -> Self {
        Self { k, search_k: None }
    }

    pub fn with_search_k(k: usize, search_k: usize) -> Self {
        Self { k, search_k: Some(search_k) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnForest {
    dim: usize,
    params: AnnParams,
    trees: Vec<Tree>,
}

impl AnnForest {
    pub fn build(store: &EmbeddingStore, params: AnnParams) -> Result<Self, AnnError> {
        params.validate()?;
        if store.is_empty() {
            return Err(AnnError::EmptyStore);
        }
        let items: Vec<(u64, &[f32])> = store.iter().map(|(id, v)| (id, v.as_slice())).collect();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                build_tree(&items, store.dim(), params.leaf_capacity, &mut rng)
            })
            .collect();
        Ok(Self { dim: store.dim(), params, trees })
    }

    pub(crate) fn from_parts(dim: usize, params: AnnParams, trees: Vec<Tree>) -> Self {
        Self { dim, params, trees }
    }

    pub(crate) fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> AnnParams {
        self.params
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Span ids per leaf, for one tree, in traversal order.
    pub fn leaves(&self, tree: usize) -> Vec<&[u64]> {
        self.trees[tree]
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf(ids) => Some(ids.as_slice()),
                Node::Split { .. } => None,
            })
            .collect()
    }

    /// Unit normals of every internal node.
    pub fn normals(&self) -> impl Iterator<Item = &[f32]> {
        self.trees.iter().flat_map(|t| {
            t.nodes.iter().filter_map(|n| match n {
                Node::Split { normal, .. } => Some(normal.as_slice()),
                Node::Leaf(_) => None,
            })
        })
    }

    /// Approximate top-`k` by cosine. Candidates are scored against `store`,
    /// which must be the store the forest was built from.
    pub fn query(
        &self,
        store: &EmbeddingStore,
        q: &EmbeddingVector,
        budget: AnnQueryBudget,
    ) -> Result<Vec<ScoredSpan>, AnnError> {
        if q.dim() != self.dim {
            return Err(AnnError::DimensionMismatch { expected: self.dim, found: q.dim() });
        }
        if store.dim() != self.dim {
            return Err(AnnError::DimensionMismatch { expected: self.dim, found: store.dim() });
        }
        if budget.k == 0 {
            return Err(AnnError::InvalidParams("k must be at least 1".into()));
        }
        let search_k = budget.search_k.unwrap_or(self.trees.len() * budget.k * 4).max(budget.k);
        let candidates = self.candidates(q.as_slice(), search_k);
        let hits = candidates
            .into_iter()
            .filter_map(|id| store.get(id).map(|v| (id, cosine_slices(q.as_slice(), v.as_slice()))))
            .collect();
        Ok(rank_top_n(hits, budget.k))
    }

    fn candidates(&self, q: &[f32], search_k: usize) -> Vec<u64> {
        let mut heap = BinaryHeap::new();
        for tree in 0..self.trees.len() {
            heap.push(Frontier { priority: f64::INFINITY, tree: tree as u32, node: 0 });
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        while out.len() < search_k {
            let Some(top) = heap.pop() else { break };
            match &self.trees[top.tree as usize].nodes[top.node as usize] {
                Node::Leaf(ids) => {
                    for &id in ids {
                        if seen.insert(id) {
                            out.push(id);
                        }
                    }
                }
                Node::Split { normal, offset, left, right } => {
                    let margin = dot(normal, q) - offset;
                    let (near, far) = if margin >= 0.0 { (*right, *left) } else { (*left, *right) };
                    let d = margin.abs();
                    heap.push(Frontier { priority: top.priority.min(d), tree: top.tree, node: near });
                    heap.push(Frontier { priority: top.priority.min(-d), tree: top.tree, node: far });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    priority: f64,
    tree: u32,
    node: u32,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.tree.cmp(&self.tree))
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn build_tree(items: &[(u64, &[f32])], dim: usize, leaf_capacity: usize, rng: &mut ChaCha8Rng) -> Tree {
    let mut nodes = vec![Node::Leaf(Vec::new())];
    let mut work = vec![(0usize, (0..items.len()).collect::<Vec<usize>>())];
    while let Some((slot, members)) = work.pop() {
        if members.len() <= leaf_capacity {
            nodes[slot] = Node::Leaf(members.iter().map(|&i| items[i].0).collect());
            continue;
        }
        let split = two_means_split(items, &members, rng).unwrap_or_else(|| balanced_split(items, &members, dim, rng));
        let left = nodes.len();
        nodes.push(Node::Leaf(Vec::new()));
        nodes.push(Node::Leaf(Vec::new()));
        nodes[slot] =
            Node::Split { normal: split.normal, offset: split.offset, left: left as u32, right: left as u32 + 1 };
        work.push((left + 1, split.right));
        work.push((left, split.left));
    }
    Tree { nodes }
}

struct Split {
    normal: Vec<f32>,
    offset: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

/// Dot product with eight fixed-order partial sums.
fn dot_lanes(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f32>() + tail
}

fn unit(v: &[f32]) -> Option<Vec<f32>> {
    let norm = dot_lanes(v, v).sqrt();
    (norm > 0.0).then(|| v.iter().map(|x| x / norm).collect())
}

/// Count-weighted online 2-means from two distinct seeds, on the unit
/// sphere (angular distance `2 - 2 cos`).
fn two_means(items: &[(u64, &[f32])], members: &[usize], rng: &mut ChaCha8Rng) -> Option<(Vec<f32>, Vec<f32>)> {
    let i = rng.random_range(0..members.len());
    let mut j = rng.random_range(0..members.len() - 1);
    if j >= i {
        j += 1;
    }
    let mut p = unit(items[members[i]].1)?;
    let mut q = unit(items[members[j]].1)?;
    let (mut pn, mut qn) = (1f32, 1f32);
    let (mut ic, mut jc) = (1f32, 1f32);
    for _ in 0..TWO_MEANS_STEPS {
        let x = items[members[rng.random_range(0..members.len())]].1;
        let xn = dot_lanes(x, x).sqrt();
        if xn == 0.0 {
            continue;
        }
        let di = ic * (2.0 - 2.0 * dot_lanes(&p, x) / (pn * xn));
        let dj = jc * (2.0 - 2.0 * dot_lanes(&q, x) / (qn * xn));
        let (c, count, c_norm) = if di < dj {
            (&mut p, &mut ic, &mut pn)
        } else if dj < di {
            (&mut q, &mut jc, &mut qn)
        } else {
            continue;
        };
        for (cv, xv) in c.iter_mut().zip(x) {
            *cv = (*cv * *count + xv / xn) / (*count + 1.0);
        }
        *count += 1.0;
        *c_norm = dot_lanes(c, c).sqrt();
    }
    Some((p, q))
}

fn two_means_split(items: &[(u64, &[f32])], members: &[usize], rng: &mut ChaCha8Rng) -> Option<Split> {
    for _ in 0..=SPLIT_RESAMPLES {
        let Some((p, q)) = two_means(items, members, rng) else { continue };
        let diff: Vec<f64> = p.iter().zip(&q).map(|(a, b)| *a as f64 - *b as f64).collect();
        let norm = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let normal: Vec<f32> = diff.iter().map(|x| (x / norm) as f32).collect();
        let (right, left): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&m| dot(&normal, items[m].1) >= 0.0);
        let larger = left.len().max(right.len()) as f64;
        if !left.is_empty() && !right.is_empty() && larger / members.len() as f64 <= MAX_IMBALANCE {
            return Some(Split { normal, offset: 0.0, left, right });
        }
    }
    None
}

/// Halves `members` along a random direction; ties in projection are
/// broken randomly so even identical points separate.
fn balanced_split(items: &[(u64, &[f32])], members: &[usize], dim: usize, rng: &mut ChaCha8Rng) -> Split {
    let normal = loop {
        let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            break raw.iter().map(|x| (x / norm) as f32).collect::<Vec<f32>>();
        }
    };
    let mut keyed: Vec<(f64, u64, usize)> =
        members.iter().map(|&m| (dot(&normal, items[m].1), rng.random::<u64>(), m)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mid = keyed.len() / 2;
    let offset = (keyed[mid - 1].0 + keyed[mid].0) / 2.0;
    let left = keyed[..mid].iter().map(|k| k.2).collect();
    let right = keyed[mid..].iter().map(|k| k.2).collect();
    Split { normal, offset, left, right }
}
