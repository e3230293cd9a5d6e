//! Forward pass with full activation caching (consumed by the backward
//! pass, attention capture, and head ablation).

use alloc::vec::Vec;

use super::config::PosMode;
use super::params::ModelParams;
use super::rope::RopeTable;
use super::tensor::{dot, gemm, Mat, Op};
use super::ModelError;
use crate::numeric::Real;
use crate::sampler::Batch;

/// Replaces one head's context output (the per-position vectors entering
/// the output projection) with a fixed profile, one row per position.
#[derive(Debug, Clone)]
pub struct HeadMeanAblation<T> {
    pub layer: usize,
    pub head: usize,
    /// [positions, head_dim]; positions beyond the profile are left alone.
    pub mean_ctx: Mat<T>,
}

#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    pub x_in: Mat<T>,
    pub attn_inv_rms: Vec<T>,
    pub attn_normed: Mat<T>,
    /// q/k after rotation (identity in NoPE mode).
    pub q: Mat<T>,
    pub k: Mat<T>,
    pub v: Mat<T>,
    /// Row-stochastic attention weights per head, zeros above the diagonal.
    pub probs: Vec<Mat<T>>,
    /// Concatenated head outputs (after any ablation).
    pub ctx: Mat<T>,
    pub x_mid: Mat<T>,
    pub mlp_inv_rms: Vec<T>,
    pub mlp_normed: Mat<T>,
    pub gate: Mat<T>,
    pub gate_act: Mat<T>,
    pub up: Mat<T>,
    pub act: Mat<T>,
}

#[derive(Debug, Clone)]
pub struct RowCache<T> {
    pub layers: Vec<LayerCache<T>>,
    pub final_in: Mat<T>,
    pub final_inv_rms: Vec<T>,
    pub final_normed: Mat<T>,
    pub logits: Mat<T>,
}

/// RMSNorm with gain; returns the normed rows and 1/rms per row.
pub(crate) fn rmsnorm<T: Real>(x: &Mat<T>, gain: &Mat<T>, eps: f64) -> (Mat<T>, Vec<T>) {
    let (t, d) = (x.rows, x.cols);
    let mut out = Mat::zeros(t, d);
    let mut inv_rms = Vec::with_capacity(t);
    let g = gain.row(0);
    let dn = T::from_f64(d as f64);
    let eps = T::from_f64(eps);
    for r in 0..t {
        let xr = x.row(r);
        let ms = dot(xr, xr) / dn;
        let inv = (ms + eps).sqrt().recip();
        let o = out.row_mut(r);
        for i in 0..d {
            o[i] = xr[i] * inv * g[i];
        }
        inv_rms.push(inv);
    }
    (out, inv_rms)
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    (T::one() + (-x).exp()).recip()
}

/// Forward over one token row. Position t attends only to positions <= t.
pub fn forward_row<T: Real>(
    params: &ModelParams<T>,
    tokens: &[u32],
    ablate: Option<&HeadMeanAblation<T>>,
) -> Result<RowCache<T>, ModelError> {
    let cfg = &params.config;
    let t_len = tokens.len();
    if t_len == 0 || t_len > cfg.max_seq_len {
        return Err(ModelError::SequenceTooLong {
            len: t_len,
            max: cfg.max_seq_len,
        });
    }
    if let Some(&bad) = tokens.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(ModelError::InvalidToken(bad));
    }
    let (d, heads, hd) = (cfg.embed_dim, cfg.heads, cfg.head_dim());
    let rope = match cfg.pos_mode {
        PosMode::Rope => Some(RopeTable::<T>::new(t_len, hd, cfg.rope_base)?),
        PosMode::Nope => None,
    };
    let scale = T::from_f64(1.0 / crate::numeric::f64x::sqrt(hd as f64));

    let mut x = Mat::zeros(t_len, d);
    for (t, &tok) in tokens.iter().enumerate() {
        x.row_mut(t).copy_from_slice(params.embed.row(tok as usize));
    }

    let mut layers = Vec::with_capacity(cfg.layers);
    for (li, lp) in params.layers.iter().enumerate() {
        let x_in = x;
        let (attn_normed, attn_inv_rms) = rmsnorm(&x_in, &lp.attn_norm, cfg.rms_eps);

        let mut q = Mat::zeros(t_len, d);
        let mut k = Mat::zeros(t_len, d);
        let mut v = Mat::zeros(t_len, d);
        gemm(T::one(), &attn_normed, Op::N, &lp.wq, Op::N, T::zero(), &mut q);
        gemm(T::one(), &attn_normed, Op::N, &lp.wk, Op::N, T::zero(), &mut k);
        gemm(T::one(), &attn_normed, Op::N, &lp.wv, Op::N, T::zero(), &mut v);

        if let Some(rope) = &rope {
            for t in 0..t_len {
                for h in 0..heads {
                    rope.rotate(&mut q.row_mut(t)[h * hd..(h + 1) * hd], t);
                    rope.rotate(&mut k.row_mut(t)[h * hd..(h + 1) * hd], t);
                }
            }
        }

        let mut probs = Vec::with_capacity(heads);
        let mut ctx = Mat::zeros(t_len, d);
        for h in 0..heads {
            let lo = h * hd;
            let hi = lo + hd;
            let mut p = Mat::zeros(t_len, t_len);
            for t in 0..t_len {
                let qt = &q.row(t)[lo..hi];
                let row = p.row_mut(t);
                let mut maxv = T::neg_infinity();
                for s in 0..=t {
                    let score = dot(qt, &k.row(s)[lo..hi]) * scale;
                    row[s] = score;
                    if score > maxv {
                        maxv = score;
                    }
                }
                let mut sum = T::zero();
                for item in row.iter_mut().take(t + 1) {
                    *item = (*item - maxv).exp();
                    sum += *item;
                }
                let inv = sum.recip();
                for item in row.iter_mut().take(t + 1) {
                    *item *= inv;
                }
            }
            for t in 0..t_len {
                // ctx[t] = sum_s p[t][s] * v[s]
                let (head_rows, ctx_row) = (p.row(t), &mut ctx.row_mut(t)[lo..hi]);
                for s in 0..=t {
                    let w = head_rows[s];
                    let vs = &v.row(s)[lo..hi];
                    for i in 0..hd {
                        ctx_row[i] += w * vs[i];
                    }
                }
            }
            probs.push(p);
        }

        if let Some(ab) = ablate {
            if ab.layer == li {
                let lo = ab.head * hd;
                let n = t_len.min(ab.mean_ctx.rows);
                for t in 0..n {
                    ctx.row_mut(t)[lo..lo + hd].copy_from_slice(ab.mean_ctx.row(t));
                }
            }
        }

        let mut attn_out = Mat::zeros(t_len, d);
        gemm(T::one(), &ctx, Op::N, &lp.wo, Op::N, T::zero(), &mut attn_out);
        let mut x_mid = x_in.clone();
        x_mid.add_assign(&attn_out);

        let (mlp_normed, mlp_inv_rms) = rmsnorm(&x_mid, &lp.mlp_norm, cfg.rms_eps);
        let hsz = cfg.mlp_hidden;
        let mut gate = Mat::zeros(t_len, hsz);
        let mut up = Mat::zeros(t_len, hsz);
        gemm(T::one(), &mlp_normed, Op::N, &lp.w_gate, Op::N, T::zero(), &mut gate);
        gemm(T::one(), &mlp_normed, Op::N, &lp.w_up, Op::N, T::zero(), &mut up);
        let mut gate_act = Mat::zeros(t_len, hsz);
        let mut act = Mat::zeros(t_len, hsz);
        for i in 0..t_len * hsz {
            let ga = gate.data[i] * sigmoid(gate.data[i]);
            gate_act.data[i] = ga;
            act.data[i] = ga * up.data[i];
        }
        let mut mlp_out = Mat::zeros(t_len, d);
        gemm(T::one(), &act, Op::N, &lp.w_down, Op::N, T::zero(), &mut mlp_out);
        let mut x_out = x_mid.clone();
        x_out.add_assign(&mlp_out);

        layers.push(LayerCache {
            x_in,
            attn_inv_rms,
            attn_normed,
            q,
            k,
            v,
            probs,
            ctx,
            x_mid,
            mlp_inv_rms,
            mlp_normed,
            gate,
            gate_act,
            up,
            act,
        });
        x = x_out;
    }

    let final_in = x;
    let (final_normed, final_inv_rms) = rmsnorm(&final_in, &params.final_norm, cfg.rms_eps);
    let mut logits = Mat::zeros(t_len, cfg.vocab_size);
    gemm(T::one(), &final_normed, Op::N, &params.unembed, Op::N, T::zero(), &mut logits);

    Ok(RowCache {
        layers,
        final_in,
        final_inv_rms,
        final_normed,
        logits,
    })
}

/// Forward over every row of a padded batch (each at its true length).
pub fn forward_batch<T: Real>(
    params: &ModelParams<T>,
    batch: &Batch,
) -> Result<Vec<RowCache<T>>, ModelError> {
    (0..batch.rows)
        .map(|r| forward_row(params, batch.row_tokens(r), None))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::ModelConfig;
    use crate::model::params::init_params;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(pos: PosMode) -> ModelParams<f64> {
        let mut c = ModelConfig::sized(2, 2, 16);
        c.vocab_size = 11;
        c.pos_mode = pos;
        init_params(&c, 3)
    }

    #[test]
    fn attention_rows_sum_to_one_and_are_causal() {
        let p = tiny(PosMode::Rope);
        let tokens = [1u32, 4, 7, 2, 9, 3];
        let cache = forward_row(&p, &tokens, None).unwrap();
        for lc in &cache.layers {
            for head in &lc.probs {
                for t in 0..tokens.len() {
                    let row = head.row(t);
                    let sum: f64 = row[..=t].iter().sum();
                    assert!((sum - 1.0).abs() < 1e-6);
                    assert!(row[t + 1..].iter().all(|&x| x == 0.0));
                }
            }
        }
    }

    #[test]
    fn causality_future_tokens_do_not_affect_past_logits() {
        let p = tiny(PosMode::Rope);
        let a = [1u32, 4, 7, 2, 9, 3];
        let mut b = a;
        b[4] = 8; // change token at position 4
        let ca = forward_row(&p, &a, None).unwrap();
        let cb = forward_row(&p, &b, None).unwrap();
        for t in 0..4 {
            assert_eq!(ca.logits.row(t), cb.logits.row(t), "position {t}");
        }
        assert_ne!(ca.logits.row(4), cb.logits.row(4));
    }

    #[test]
    fn nope_mode_identical_tokens_give_identical_logits() {
        let p = tiny(PosMode::Nope);
        let tokens = [5u32; 7];
        let cache = forward_row(&p, &tokens, None).unwrap();
        let first = cache.logits.row(0).to_vec();
        for t in 1..tokens.len() {
            for (a, b) in cache.logits.row(t).iter().zip(&first) {
                assert!((a - b).abs() < 1e-9, "position {t}");
            }
        }
    }

    #[test]
    fn rope_mode_identical_tokens_differ_by_position() {
        let p = tiny(PosMode::Rope);
        let tokens = [5u32; 7];
        let cache = forward_row(&p, &tokens, None).unwrap();
        assert_ne!(cache.logits.row(1), cache.logits.row(6));
    }

    #[test]
    fn sequence_and_token_validation() {
        let mut c = ModelConfig::sized(1, 2, 8);
        c.vocab_size = 11;
        c.max_seq_len = 4;
        let p: ModelParams<f64> = init_params(&c, 0);
        assert!(matches!(
            forward_row(&p, &[1, 2, 3, 4, 5], None),
            Err(ModelError::SequenceTooLong { len: 5, max: 4 })
        ));
        assert!(matches!(
            forward_row(&p, &[1, 11], None),
            Err(ModelError::InvalidToken(11))
        ));
    }

    #[test]
    fn self_profile_ablation_is_identity() {
        let p = tiny(PosMode::Rope);
        let tokens = [1u32, 4, 7, 2];
        let base = forward_row(&p, &tokens, None).unwrap();
        let hd = p.config.head_dim();
        let mut profile = Mat::zeros(tokens.len(), hd);
        for t in 0..tokens.len() {
            profile
                .row_mut(t)
                .copy_from_slice(&base.layers[1].ctx.row(t)[hd..2 * hd]);
        }
        let ab = HeadMeanAblation {
            layer: 1,
            head: 1,
            mean_ctx: profile,
        };
        let ablated = forward_row(&p, &tokens, Some(&ab)).unwrap();
        assert_eq!(base.logits, ablated.logits);
    }

    #[test]
    fn batch_rows_are_independent() {
        // permuting rows permutes outputs; rows see only their own tokens
        let p = tiny(PosMode::Rope);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<u32>> = (0..3)
            .map(|_| (0..5).map(|_| rng.random_range(0..11u32)).collect())
            .collect();
        let out: Vec<_> = rows
            .iter()
            .map(|r| forward_row(&p, r, None).unwrap().logits)
            .collect();
        let out_rev: Vec<_> = rows
            .iter()
            .rev()
            .map(|r| forward_row(&p, r, None).unwrap().logits)
            .collect();
        assert_eq!(out[0], out_rev[2]);
        assert_eq!(out[2], out_rev[0]);
    }
}
