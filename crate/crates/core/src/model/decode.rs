//! Incremental single-row forward with a KV cache, for autoregressive
//! decoding.

use alloc::vec::Vec;

use super::config::PosMode;
use super::forward::sigmoid;
use super::params::ModelParams;
use super::rope::RopeTable;
use super::tensor::{dot, Mat};
use super::ModelError;
use crate::numeric::Real;

/// Accumulated rotated keys and values per layer.
pub struct KvCache<T> {
    k: Vec<Mat<T>>,
    v: Vec<Mat<T>>,
    len: usize,
    rope: Option<RopeTable<T>>,
}

impl<T: Real> KvCache<T> {
    pub fn new(params: &ModelParams<T>) -> Result<Self, ModelError> {
        let cfg = &params.config;
        let rope = match cfg.pos_mode {
            PosMode::Rope => Some(RopeTable::new(cfg.max_seq_len, cfg.head_dim(), cfg.rope_base)?),
            PosMode::Nope => None,
        };
        Ok(KvCache {
            k: (0..cfg.layers).map(|_| Mat::zeros(0, cfg.embed_dim)).collect(),
            v: (0..cfg.layers).map(|_| Mat::zeros(0, cfg.embed_dim)).collect(),
            len: 0,
            rope,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

fn push_row<T: Real>(m: &mut Mat<T>, row: &[T]) {
    debug_assert_eq!(m.cols, row.len());
    m.data.extend_from_slice(row);
    m.rows += 1;
}

/// Feeds one token at the next position; returns the logits row.
pub fn decode_step<T: Real>(
    params: &ModelParams<T>,
    cache: &mut KvCache<T>,
    token: u32,
) -> Result<Vec<T>, ModelError> {
    let cfg = &params.config;
    let pos = cache.len;
    if pos >= cfg.max_seq_len {
        return Err(ModelError::SequenceTooLong {
            len: pos + 1,
            max: cfg.max_seq_len,
        });
    }
    if token as usize >= cfg.vocab_size {
        return Err(ModelError::InvalidToken(token));
    }
    let (d, heads, hd) = (cfg.embed_dim, cfg.heads, cfg.head_dim());
    let scale = T::from_f64(1.0 / crate::numeric::f64x::sqrt(hd as f64));

    let mut x: Vec<T> = params.embed.row(token as usize).to_vec();
    let rms = |v: &[T], gain: &[T], out: &mut [T]| {
        let dn = T::from_f64(d as f64);
        let inv = (dot(v, v) / dn + T::from_f64(cfg.rms_eps)).sqrt().recip();
        for i in 0..d {
            out[i] = v[i] * inv * gain[i];
        }
    };

    let mut normed = alloc::vec![T::zero(); d];
    for (li, lp) in params.layers.iter().enumerate() {
        rms(&x, lp.attn_norm.row(0), &mut normed);

        let mut q = alloc::vec![T::zero(); d];
        let mut k = alloc::vec![T::zero(); d];
        let mut v = alloc::vec![T::zero(); d];
        for o in 0..d {
            let mut aq = T::zero();
            let mut ak = T::zero();
            let mut av = T::zero();
            for i in 0..d {
                let n = normed[i];
                aq += n * lp.wq.at(i, o);
                ak += n * lp.wk.at(i, o);
                av += n * lp.wv.at(i, o);
            }
            q[o] = aq;
            k[o] = ak;
            v[o] = av;
        }
        if let Some(rope) = &cache.rope {
            for h in 0..heads {
                rope.rotate(&mut q[h * hd..(h + 1) * hd], pos);
                rope.rotate(&mut k[h * hd..(h + 1) * hd], pos);
            }
        }
        push_row(&mut cache.k[li], &k);
        push_row(&mut cache.v[li], &v);

        let all_k = &cache.k[li];
        let all_v = &cache.v[li];
        let mut ctx = alloc::vec![T::zero(); d];
        let mut scores = alloc::vec![T::zero(); pos + 1];
        for h in 0..heads {
            let lo = h * hd;
            let hi = lo + hd;
            let qh = &q[lo..hi];
            let mut maxv = T::neg_infinity();
            for (s, score) in scores.iter_mut().enumerate() {
                *score = dot(qh, &all_k.row(s)[lo..hi]) * scale;
                if *score > maxv {
                    maxv = *score;
                }
            }
            let mut sum = T::zero();
            for score in scores.iter_mut() {
                *score = (*score - maxv).exp();
                sum += *score;
            }
            let inv = sum.recip();
            for (s, score) in scores.iter().enumerate() {
                let w = *score * inv;
                let vs = &all_v.row(s)[lo..hi];
                for i in 0..hd {
                    ctx[lo + i] += w * vs[i];
                }
            }
        }
        for o in 0..d {
            let mut acc = T::zero();
            for i in 0..d {
                acc += ctx[i] * lp.wo.at(i, o);
            }
            x[o] += acc;
        }

        rms(&x, lp.mlp_norm.row(0), &mut normed);
        let hsz = cfg.mlp_hidden;
        let mut act = alloc::vec![T::zero(); hsz];
        for o in 0..hsz {
            let mut g = T::zero();
            let mut u = T::zero();
            for i in 0..d {
                let n = normed[i];
                g += n * lp.w_gate.at(i, o);
                u += n * lp.w_up.at(i, o);
            }
            act[o] = g * sigmoid(g) * u;
        }
        for o in 0..d {
            let mut acc = T::zero();
            for i in 0..hsz {
                acc += act[i] * lp.w_down.at(i, o);
            }
            x[o] += acc;
        }
    }

    rms(&x, params.final_norm.row(0), &mut normed);
    let mut logits = alloc::vec![T::zero(); cfg.vocab_size];
    for (o, l) in logits.iter_mut().enumerate() {
        let mut acc = T::zero();
        for i in 0..d {
            acc += normed[i] * params.unembed.at(i, o);
        }
        *l = acc;
    }
    cache.len += 1;
    Ok(logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::ModelConfig;
    use crate::model::forward::forward_row;
    use crate::model::params::init_params;

    #[test]
    fn incremental_decode_matches_full_forward() {
        for pos in [PosMode::Rope, PosMode::Nope] {
            let mut c = ModelConfig::sized(2, 2, 16);
            c.vocab_size = 11;
            c.pos_mode = pos;
            let params: ModelParams<f64> = init_params(&c, 4);
            let tokens = [1u32, 4, 7, 2, 9];
            let full = forward_row(&params, &tokens, None).unwrap();
            let mut cache = KvCache::new(&params).unwrap();
            for (t, &tok) in tokens.iter().enumerate() {
                let logits = decode_step(&params, &mut cache, tok).unwrap();
                for (a, b) in logits.iter().zip(full.logits.row(t)) {
                    assert!((a - b).abs() < 1e-9, "{pos:?} pos {t}");
                }
            }
        }
    }

    #[test]
    fn context_overflow_is_reported() {
        let mut c = ModelConfig::sized(1, 2, 8);
        c.vocab_size = 5;
        c.max_seq_len = 2;
        let params: ModelParams<f32> = init_params(&c, 0);
        let mut cache = KvCache::new(&params).unwrap();
        decode_step(&params, &mut cache, 1).unwrap();
        decode_step(&params, &mut cache, 1).unwrap();
        assert!(matches!(
            decode_step(&params, &mut cache, 1),
            Err(ModelError::SequenceTooLong { .. })
        ));
    }
}
