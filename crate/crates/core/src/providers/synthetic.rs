use sha2::{Digest, Sha256};

use super::{ProviderError, TextEmbedder};

/// Hash-expansion embedder: a pure function of `(seed, dim, text)`.
///
/// Component blocks come from SHA-256 over the seed, dimension, text and a
/// block counter; each 32-bit word maps linearly onto [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticEmbedder {
    pub seed: u64,
    pub dim: usize,
}

impl SyntheticEmbedder {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self { seed, dim }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.dim);
        let mut block = 0u64;
        while out.len() < self.dim {
            let mut h = Sha256::new();
            h.update(self.seed.to_le_bytes());
            h.update((self.dim as u64).to_le_bytes());
            h.update((text.len() as u64).to_le_bytes());
            h.update(text.as_bytes());
            h.update(block.to_le_bytes());
            let digest = h.finalize();
            for word in digest.chunks_exact(4) {
                if out.len() == self.dim {
                    break;
                }
                let x = u32::from_le_bytes(word.try_into().expect("4-byte chunk"));
                out.push((f64::from(x) / f64::from(u32::MAX) * 2.0 - 1.0) as f32);
            }
            block += 1;
        }
        out
    }
}

impl TextEmbedder for SyntheticEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        if texts.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn identity(&self) -> String {
        format!("synthetic:seed={};dim={}", self.seed, self.dim)
    }
}
