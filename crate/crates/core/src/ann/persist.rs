//! Single-file forest format.
//!
//! Header (little-endian): magic `PRIORANN`, format version `u32`, dim
//! `u32`, tree count `u32`, leaf capacity `u32`, seed `u64`, body length
//! `u64`, sha256 of the body. The body holds, per tree, a node count
//! followed by node records: tag `0` leaf (`u32` count, `u64` ids) or tag
//! `1` split (`u32` left, `u32` right, `f64` offset, `dim` x `f32` normal).

use byteorder::{LittleEndian as LE, WriteBytesExt};

use super::{AnnError, AnnForest, AnnParams, Node, Tree};
use crate::storage::{sha256, PersistError, Reader};

pub const ANN_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"PRIORANN";

pub fn ann_save(forest: &AnnForest) -> Vec<u8> {
    let mut body = Vec::new();
    for tree in forest.trees() {
        body.write_u32::<LE>(tree.nodes.len() as u32).unwrap();
        for node in &tree.nodes {
            match node {
                Node::Leaf(ids) => {
                    body.write_u8(0).unwrap();
                    body.write_u32::<LE>(ids.len() as u32).unwrap();
                    for id in ids {
                        body.write_u64::<LE>(*id).unwrap();
                    }
                }
                Node::Split { normal, offset, left, right } => {
                    body.write_u8(1).unwrap();
                    body.write_u32::<LE>(*left).unwrap();
                    body.write_u32::<LE>(*right).unwrap();
                    body.write_f64::<LE>(*offset).unwrap();
                    for c in normal {
                        body.write_f32::<LE>(*c).unwrap();
                    }
                }
            }
        }
    }
    let params = forest.params();
    let mut out = Vec::with_capacity(body.len() + 72);
    out.extend_from_slice(MAGIC);
    out.write_u32::<LE>(ANN_FORMAT_VERSION).unwrap();
    out.write_u32::<LE>(forest.dim() as u32).unwrap();
    out.write_u32::<LE>(forest.n_trees() as u32).unwrap();
    out.write_u32::<LE>(params.leaf_capacity as u32).unwrap();
    out.write_u64::<LE>(params.seed).unwrap();
    out.write_u64::<LE>(body.len() as u64).unwrap();
    out.extend_from_slice(&sha256(&body));
    out.extend_from_slice(&body);
    out
}

/// Parses a forest, checking magic, version, length and checksum before
/// decoding any node.
pub fn ann_load(bytes: &[u8]) -> Result<AnnForest, AnnError> {
    let mut r = Reader::new(bytes);
    if r.bytes(MAGIC.len())? != MAGIC {
        return Err(PersistError::BadMagic.into());
    }
    let version = r.u32()?;
    if version != ANN_FORMAT_VERSION {
        return Err(PersistError::UnsupportedVersion { found: version, supported: ANN_FORMAT_VERSION }.into());
    }
    let dim = r.u32()? as usize;
    let n_trees = r.u32()? as usize;
    let leaf_capacity = r.u32()? as usize;
    let seed = r.u64()?;
    let body_len = r.u64()? as usize;
    let checksum = r.bytes(32)?;
    let body = r.bytes(body_len)?;
    r.finish()?;
    if sha256(body) != checksum {
        return Err(PersistError::ChecksumMismatch("forest".into()).into());
    }

    let corrupt = |m: &str| AnnError::Persist(PersistError::Corrupt(m.to_string()));
    let mut r = Reader::new(body);
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes = r.u32()? as usize;
        if n_nodes == 0 || n_nodes > r.remaining() {
            return Err(corrupt("bad node count"));
        }
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let node = match r.u8()? {
                0 => {
                    let n = r.u32()? as usize;
                    if n.saturating_mul(8) > r.remaining() {
                        return Err(PersistError::Truncated.into());
                    }
                    Node::Leaf((0..n).map(|_| r.u64()).collect::<Result<_, _>>()?)
                }
                1 => {
                    let left = r.u32()?;
                    let right = r.u32()?;
                    let offset = r.f64()?;
                    let normal = (0..dim).map(|_| r.f32()).collect::<Result<Vec<f32>, _>>()?;
                    if left as usize >= n_nodes || right as usize >= n_nodes {
                        return Err(corrupt("child index out of range"));
                    }
                    Node::Split { normal, offset, left, right }
                }
                _ => return Err(corrupt("unknown node tag")),
            };
            nodes.push(node);
        }
        trees.push(Tree { nodes });
    }
    r.finish()?;
    let params = AnnParams { n_trees, leaf_capacity, seed };
    params.validate()?;
    Ok(AnnForest::from_parts(dim, params, trees))
}
