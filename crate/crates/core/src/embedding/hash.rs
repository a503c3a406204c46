use super::{Embedder, EmbedderDescriptor, EmbeddingVector};
use crate::lexical::tokenize;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Signed feature hashing over the lexical tokens, L2-normalized.
///
/// Token `t` lands in bucket `fnv1a64(t) mod dim`; its sign is the top bit
/// of `fnv1a64("s:" + t)` (0 is positive). Text with no tokens maps to the
/// zero vector.
pub fn embed_hash(text: &str, dim: usize) -> EmbeddingVector {
    let mut acc = vec![0.0f64; dim];
    for token in tokenize(text) {
        let bucket = (fnv1a64(token.as_bytes()) % dim as u64) as usize;
        let mut salted = Vec::with_capacity(token.len() + 2);
        salted.extend_from_slice(b"s:");
        salted.extend_from_slice(token.as_bytes());
        let sign = if fnv1a64(&salted) >> 63 == 0 { 1.0 } else { -1.0 };
        acc[bucket] += sign;
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return EmbeddingVector::zeros(dim);
    }
    EmbeddingVector(acc.into_iter().map(|x| (x / norm) as f32).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Result<Self, super::EmbeddingError> {
        if dim < 2 {
            return Err(super::EmbeddingError::InvalidDim(dim));
        }
        Ok(Self { dim })
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dim: super::DEFAULT_DIM }
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        embed_hash(text, self.dim)
    }

    fn descriptor(&self) -> EmbedderDescriptor {
        EmbedderDescriptor::hash(self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fnv_reference_values() {
        // computed offline with a separate FNV-1a implementation
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"network"), 0x1e8e57b2909b2a85);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let v = embed_hash("", 16);
        assert_eq!(v.dim(), 16);
        assert!(v.is_zero());
    }

    #[test]
    fn repeated_token_hits_one_bucket() {
        let v = embed_hash("network network", 256);
        let nonzero: Vec<(usize, f32)> = v.as_slice().iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect();
        // fnv1a64("network") % 256 == 133; top bit of fnv1a64("s:network") is set
        assert_eq!(nonzero, vec![(133, -1.0)]);
    }

    #[test]
    fn normalized() {
        let v = embed_hash("a wireless device connects to an access point", 256);
        assert!((v.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_tiny_dim() {
        assert!(HashEmbedder::new(1).is_err());
    }

    proptest! {
        #[test]
        fn token_order_does_not_matter(words in prop::collection::vec("[a-z]{1,6}", 1..12), seed in any::<u64>()) {
            let mut shuffled = words.clone();
            let len = shuffled.len();
            for i in 0..len {
                let j = (seed.wrapping_mul(i as u64 + 7) % len as u64) as usize;
                shuffled.swap(i, j);
            }
            let a = embed_hash(&words.join(" "), 64);
            let b = embed_hash(&shuffled.join(" "), 64);
            prop_assert_eq!(a, b);
        }
    }
}
