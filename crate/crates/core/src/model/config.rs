//! Model hyperparameters.

use super::ModelError;

/// Positional-information mode: rotary embeddings on q/k, or none at all
/// (identical architecture with the rotation skipped).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosMode {
    Rope,
    Nope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub embed_dim: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub pos_mode: PosMode,
    pub rope_base: f64,
    /// Gated-MLP hidden width; `default_mlp_hidden` gives the ~8/3 expansion.
    pub mlp_hidden: usize,
    pub rms_eps: f64,
}

/// 8/3 expansion rounded up to a multiple of 8 (exactly 1024 for dim 384).
pub fn default_mlp_hidden(embed_dim: usize) -> usize {
    let h = (8 * embed_dim).div_ceil(3);
    h.div_ceil(8) * 8
}

impl Default for ModelConfig {
    /// The from-scratch experiment model: 6 layers, 6 heads, embedding 384,
    /// rotary encoding with base 10000.
    fn default() -> Self {
        ModelConfig {
            layers: 6,
            heads: 6,
            embed_dim: 384,
            vocab_size: 139,
            max_seq_len: 1024,
            pos_mode: PosMode::Rope,
            rope_base: 10000.0,
            mlp_hidden: default_mlp_hidden(384),
            rms_eps: 1e-5,
        }
    }
}

impl ModelConfig {
    /// A sized-down config sharing all other defaults.
    pub fn sized(layers: usize, heads: usize, embed_dim: usize) -> Self {
        ModelConfig {
            layers,
            heads,
            embed_dim,
            mlp_hidden: default_mlp_hidden(embed_dim),
            ..Default::default()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layers == 0 || self.heads == 0 || self.vocab_size == 0 {
            return Err(ModelError::BadConfig("zero-sized model"));
        }
        if self.embed_dim % self.heads != 0 {
            return Err(ModelError::BadConfig("embed dim not divisible by heads"));
        }
        if self.pos_mode == PosMode::Rope && self.head_dim() % 2 != 0 {
            return Err(ModelError::OddHeadDim(self.head_dim()));
        }
        Ok(())
    }

    /// Total parameter count from shapes.
    pub fn param_count(&self) -> usize {
        let (d, h, v) = (self.embed_dim, self.mlp_hidden, self.vocab_size);
        let per_layer = 4 * d * d + 3 * d * h + 2 * d;
        v * d + self.layers * per_layer + d + d * v
    }
}
