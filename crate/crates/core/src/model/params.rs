//! Parameter storage and initialization.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::tensor::Mat;
use crate::numeric::Real;
use crate::numeric::f64x;
use crate::rng::model_init_rng;

/// Projection matrices are stored `[in, out]` so activations multiply on the
/// left. Norm gains are 1-row matrices to keep tensor iteration uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub wq: Mat<T>,
    pub wk: Mat<T>,
    pub wv: Mat<T>,
    pub wo: Mat<T>,
    pub attn_norm: Mat<T>,
    pub w_gate: Mat<T>,
    pub w_up: Mat<T>,
    pub w_down: Mat<T>,
    pub mlp_norm: Mat<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub embed: Mat<T>,
    pub layers: Vec<LayerParams<T>>,
    pub final_norm: Mat<T>,
    pub unembed: Mat<T>,
}

const TENSORS_PER_LAYER: usize = 9;

impl<T: Real> ModelParams<T> {
    /// All-zero parameters; also the shape of gradient and moment buffers.
    pub fn zeros(config: &ModelConfig) -> Self {
        let (d, h, v) = (config.embed_dim, config.mlp_hidden, config.vocab_size);
        let layer = || LayerParams {
            wq: Mat::zeros(d, d),
            wk: Mat::zeros(d, d),
            wv: Mat::zeros(d, d),
            wo: Mat::zeros(d, d),
            attn_norm: Mat::zeros(1, d),
            w_gate: Mat::zeros(d, h),
            w_up: Mat::zeros(d, h),
            w_down: Mat::zeros(h, d),
            mlp_norm: Mat::zeros(1, d),
        };
        ModelParams {
            config: config.clone(),
            embed: Mat::zeros(v, d),
            layers: (0..config.layers).map(|_| layer()).collect(),
            final_norm: Mat::zeros(1, d),
            unembed: Mat::zeros(d, v),
        }
    }

    pub fn tensor_count(&self) -> usize {
        1 + self.config.layers * TENSORS_PER_LAYER + 2
    }

    pub fn tensor(&self, idx: usize) -> &Mat<T> {
        let l = self.config.layers;
        match idx {
            0 => &self.embed,
            i if i < 1 + l * TENSORS_PER_LAYER => {
                let layer = &self.layers[(i - 1) / TENSORS_PER_LAYER];
                match (i - 1) % TENSORS_PER_LAYER {
                    0 => &layer.wq,
                    1 => &layer.wk,
                    2 => &layer.wv,
                    3 => &layer.wo,
                    4 => &layer.attn_norm,
                    5 => &layer.w_gate,
                    6 => &layer.w_up,
                    7 => &layer.w_down,
                    _ => &layer.mlp_norm,
                }
            }
            i if i == 1 + l * TENSORS_PER_LAYER => &self.final_norm,
            _ => &self.unembed,
        }
    }

    pub fn tensor_mut(&mut self, idx: usize) -> &mut Mat<T> {
        let l = self.config.layers;
        match idx {
            0 => &mut self.embed,
            i if i < 1 + l * TENSORS_PER_LAYER => {
                let layer = &mut self.layers[(i - 1) / TENSORS_PER_LAYER];
                match (i - 1) % TENSORS_PER_LAYER {
                    0 => &mut layer.wq,
                    1 => &mut layer.wk,
                    2 => &mut layer.wv,
                    3 => &mut layer.wo,
                    4 => &mut layer.attn_norm,
                    5 => &mut layer.w_gate,
                    6 => &mut layer.w_up,
                    7 => &mut layer.w_down,
                    _ => &mut layer.mlp_norm,
                }
            }
            i if i == 1 + l * TENSORS_PER_LAYER => &mut self.final_norm,
            _ => &mut self.unembed,
        }
    }

    pub fn tensor_name(&self, idx: usize) -> String {
        let l = self.config.layers;
        match idx {
            0 => "embed".into(),
            i if i < 1 + l * TENSORS_PER_LAYER => {
                let layer = (i - 1) / TENSORS_PER_LAYER;
                let name = [
                    "wq", "wk", "wv", "wo", "attn_norm", "w_gate", "w_up", "w_down", "mlp_norm",
                ][(i - 1) % TENSORS_PER_LAYER];
                format!("layer{layer}.{name}")
            }
            i if i == 1 + l * TENSORS_PER_LAYER => "final_norm".into(),
            _ => "unembed".into(),
        }
    }

    pub fn param_count(&self) -> usize {
        (0..self.tensor_count()).map(|i| self.tensor(i).data.len()).sum()
    }

    /// self += other over every tensor.
    pub fn add_assign(&mut self, other: &ModelParams<T>) {
        for idx in 0..self.tensor_count() {
            let src = other.tensor(idx) as *const Mat<T>;
            // no aliasing: self and other are distinct allocations
            self.tensor_mut(idx).add_assign(unsafe { &*src });
        }
    }

    pub fn scale(&mut self, s: T) {
        for idx in 0..self.tensor_count() {
            self.tensor_mut(idx).scale(s);
        }
    }

    /// Converts every tensor's scalars (for f32 checkpoints of f64 params
    /// and vice versa).
    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(&self.config);
        for idx in 0..self.tensor_count() {
            let src = self.tensor(idx);
            let dst = out.tensor_mut(idx);
            for (d, s) in dst.data.iter_mut().zip(&src.data) {
                *d = U::from_f64(s.as_f64());
            }
        }
        out
    }
}

fn gauss(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random();
    std * f64x::sqrt(-2.0 * f64x::ln(u1)) * f64x::cos(2.0 * core::f64::consts::PI * u2)
}

/// Scaled normal initialization: std 0.02 everywhere, output projections
/// (`wo`, `w_down`) scaled by 1/sqrt(2 * layers), norm gains 1. Deterministic
/// per seed; the draw sequence is independent of the scalar type.
pub fn init_params<T: Real>(config: &ModelConfig, seed: u64) -> ModelParams<T> {
    config.validate().expect("valid config");
    let mut rng = model_init_rng(seed);
    let mut params = ModelParams::<T>::zeros(config);
    let residual_scale = 1.0 / f64x::sqrt(2.0 * config.layers as f64);
    for idx in 0..params.tensor_count() {
        let name = params.tensor_name(idx);
        let t = params.tensor_mut(idx);
        if name.ends_with("norm") {
            t.fill(T::one());
        } else {
            let std = if name.ends_with("wo") || name.ends_with("w_down") {
                0.02 * residual_scale
            } else {
                0.02
            };
            for x in t.data.iter_mut() {
                *x = T::from_f64(gauss(&mut rng, std));
            }
        }
    }
    params
}
