//! Deterministic offline embedder: each token hashes (with the seed) to a
//! pseudo-random direction, and a text embeds to the sum over its token
//! multiset. Tokens are sorted before summing so equal multisets produce
//! bit-identical vectors regardless of word order.

use sha2::{Digest, Sha256};

use super::{Embedder, EmbeddingVector, GatewayError};

#[derive(Debug, Clone)]
pub struct MockEmbedder {
    seed: u64,
    dim: usize,
}

impl MockEmbedder {
    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { seed, dim }
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.dim);
        let mut block: u64 = 0;
        let mut bytes: Vec<u8> = Vec::new();
        while values.len() < self.dim {
            if bytes.len() < 8 {
                let mut hasher = Sha256::new();
                hasher.update(self.seed.to_le_bytes());
                hasher.update(token.as_bytes());
                hasher.update(block.to_le_bytes());
                bytes = hasher.finalize().to_vec();
                block += 1;
            }
            let word = u64::from_le_bytes(bytes[..8].try_into().unwrap());
            bytes.drain(..8);
            // map to [-1, 1)
            values.push((word as f64) / (u64::MAX as f64 / 2.0) - 1.0);
        }
        values
    }
}

impl Embedder for MockEmbedder {
    fn id(&self) -> String {
        format!("mock-s{}-d{}", self.seed, self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        texts
            .iter()
            .map(|text| {
                if text.is_empty() {
                    return Err(GatewayError::ProtocolViolation(
                        "cannot embed empty text".into(),
                    ));
                }
                let mut tokens: Vec<&str> = text.split_whitespace().collect();
                tokens.sort_unstable();
                let mut acc = vec![0.0f64; self.dim];
                for token in tokens {
                    for (a, v) in acc.iter_mut().zip(self.token_vector(token)) {
                        *a += v;
                    }
                }
                Ok(EmbeddingVector::new(acc))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_texts_embed_identically() {
        let e = MockEmbedder::new(7, 8);
        let vs = e.embed(&["same text".into(), "same text".into()]).unwrap();
        assert_eq!(vs[0], vs[1]);
    }

    #[test]
    fn equal_token_multisets_embed_identically() {
        let e = MockEmbedder::new(1, 8);
        let vs = e.embed(&["a b".into(), "b a".into()]).unwrap();
        assert_eq!(vs[0], vs[1]);
        let vs = e.embed(&["x y z y".into(), "y z y x".into()]).unwrap();
        assert_eq!(vs[0], vs[1]);
    }

    #[test]
    fn output_arity_matches_input() {
        let e = MockEmbedder::new(1, 4);
        let texts: Vec<String> = (0..5).map(|i| format!("t{i}")).collect();
        assert_eq!(e.embed(&texts).unwrap().len(), 5);
    }

    #[test]
    fn dimension_is_constant_and_configurable() {
        for dim in [1, 8, 33, 64] {
            let e = MockEmbedder::new(3, dim);
            let v = e.embed_one("hello world").unwrap();
            assert_eq!(v.dim(), dim);
            assert!(v.is_finite());
        }
    }

    #[test]
    fn empty_text_is_rejected() {
        let e = MockEmbedder::new(1, 4);
        assert!(e.embed(&["".into()]).is_err());
    }

    #[test]
    fn different_seeds_give_different_vectors() {
        let a = MockEmbedder::new(1, 8).embed_one("token").unwrap();
        let b = MockEmbedder::new(2, 8).embed_one("token").unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn self_cosine_is_one_for_any_nonzero_embedding() {
        let e = MockEmbedder::new(5, 16);
        for text in ["one", "two words", "a much longer sentence with tokens"] {
            let v = e.embed_one(text).unwrap();
            let cos = crate::retrieval::cosine(&v, &v).unwrap();
            assert!((cos - 1.0).abs() < 1e-9, "{text}: {cos}");
        }
    }
}
