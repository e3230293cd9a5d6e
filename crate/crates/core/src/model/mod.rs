//! Decoder-only transformer with causal attention, switchable rotary/no
//! positional encoding, manual backpropagation, and AdamW with a
//! warmup-constant-cosine schedule.
//!
//! Llama-style block: pre-norm RMSNorm, gated SiLU MLP, no biases, untied
//! unembedding. Generic over `f32`/`f64` so training runs in single
//! precision while gradient checks run in double.

pub mod adamw;
pub mod backward;
pub mod config;
pub mod decode;
pub mod forward;
pub mod params;
pub mod rope;
pub mod schedule;
pub mod tensor;

pub use adamw::{adamw_step, AdamHyper, OptimizerState};
pub use backward::{accumulate_row_grads, gradients};
pub use config::{ModelConfig, PosMode};
pub use decode::KvCache;
pub use forward::{forward_row, HeadMeanAblation, RowCache};
pub use params::{init_params, ModelParams};
pub use rope::{rope_rotate, rope_rotate_inv};
pub use schedule::{lr_at, LrSchedule};
pub use tensor::Mat;

use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    SequenceTooLong { len: usize, max: usize },
    InvalidToken(u32),
    OddHeadDim(usize),
    EmptyMask,
    ShapeMismatch,
    BadConfig(&'static str),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::SequenceTooLong { len, max } => {
                write!(f, "sequence length {len} exceeds max {max}")
            }
            ModelError::InvalidToken(id) => write!(f, "token id {id} outside vocabulary"),
            ModelError::OddHeadDim(d) => write!(f, "head dim {d} must be even for rotation"),
            ModelError::EmptyMask => write!(f, "loss mask selects no positions"),
            ModelError::ShapeMismatch => write!(f, "operand shapes disagree"),
            ModelError::BadConfig(msg) => write!(f, "bad config: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ModelError {}
