use serde::{Deserialize, Serialize};

use crate::prompting::DEFAULT_CONTEXT_LEN;

use super::PolicyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub context_len: usize,
    /// Filled from the vocabulary at build time; 0 means "not yet known".
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { layers: 2, heads: 4, d_model: 128, context_len: DEFAULT_CONTEXT_LEN, vocab_size: 0, seed: 0 }
    }
}

impl ModelConfig {
    pub fn with_vocab(mut self, vocab_size: usize) -> Self {
        self.vocab_size = vocab_size;
        self
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::InvalidConfig(m.to_string()));
        if self.layers == 0 || self.heads == 0 || self.d_model == 0 || self.context_len == 0 {
            return bad("layers, heads, d_model and context_len must be positive");
        }
        if self.d_model % self.heads != 0 {
            return bad("d_model must be divisible by heads");
        }
        if self.vocab_size == 0 {
            return bad("vocab_size is unset");
        }
        Ok(())
    }

    /// Closed-form number of scalars in a model of this shape.
    pub fn parameter_count(&self) -> usize {
        let (v, d, c, l) = (self.vocab_size, self.d_model, self.context_len, self.layers);
        let per_layer = 2 * d + (3 * d * d + 3 * d) + (d * d + d) + 2 * d + (4 * d * d + 4 * d) + (4 * d * d + d);
        v * d + c * d + l * per_layer + 2 * d + d * v + v
    }
}
