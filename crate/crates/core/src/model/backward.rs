//! Masked cross-entropy loss and exact gradients by reverse accumulation.

use alloc::vec::Vec;

use super::config::PosMode;
use super::forward::{forward_row, sigmoid, RowCache};
use super::params::ModelParams;
use super::rope::RopeTable;
use super::tensor::{dot, gemm, Mat, Op};
use super::ModelError;
use crate::numeric::Real;
use crate::sampler::Batch;

/// log(sum(exp(row))) with max subtraction.
fn log_sum_exp<T: Real>(row: &[T]) -> T {
    let maxv = row.iter().copied().fold(T::neg_infinity(), T::max);
    let sum = row
        .iter()
        .fold(T::zero(), |acc, &x| acc + (x - maxv).exp());
    maxv + sum.ln()
}

/// Sum of next-token cross-entropy terms over positions with mask = 1, and
/// their count. Logit row t scores token t+1; mask indexes the predicted
/// position.
pub fn loss_terms<T: Real>(logits: &Mat<T>, tokens: &[u32], mask: &[u8]) -> (f64, usize) {
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for t in 0..tokens.len().saturating_sub(1) {
        if mask[t + 1] == 1 {
            let row = logits.row(t);
            let lse = log_sum_exp(row);
            sum += (lse - row[tokens[t + 1] as usize]).as_f64();
            count += 1;
        }
    }
    (sum, count)
}

/// Mean masked cross-entropy for one row. Errors if the mask selects no
/// predicted positions.
pub fn masked_loss<T: Real>(logits: &Mat<T>, tokens: &[u32], mask: &[u8]) -> Result<T, ModelError> {
    let (sum, count) = loss_terms(logits, tokens, mask);
    if count == 0 {
        return Err(ModelError::EmptyMask);
    }
    Ok(T::from_f64(sum / count as f64))
}

/// RMSNorm backward: adds parameter grads to `dgain` and the input grads to
/// `dx_acc`.
fn rmsnorm_backward<T: Real>(
    dy: &Mat<T>,
    x: &Mat<T>,
    inv_rms: &[T],
    gain: &Mat<T>,
    dgain: &mut Mat<T>,
    dx_acc: &mut Mat<T>,
) {
    let (t_len, d) = (x.rows, x.cols);
    let g = gain.row(0);
    let dn = T::from_f64(d as f64);
    for t in 0..t_len {
        let (dyr, xr, inv) = (dy.row(t), x.row(t), inv_rms[t]);
        let dgain_row = dgain.row_mut(0);
        let mut dot_dxhat_x = T::zero();
        for i in 0..d {
            dgain_row[i] += dyr[i] * xr[i] * inv;
            dot_dxhat_x += dyr[i] * g[i] * xr[i];
        }
        let coeff = inv * inv * inv / dn * dot_dxhat_x;
        let dxr = dx_acc.row_mut(t);
        for i in 0..d {
            dxr[i] += inv * dyr[i] * g[i] - coeff * xr[i];
        }
    }
}

/// Backpropagates one row's unnormalized loss sum into `grads` (same shapes
/// as the parameters). Returns (loss sum, masked-position count) so callers
/// can normalize once over a whole batch.
pub fn accumulate_row_grads<T: Real>(
    params: &ModelParams<T>,
    tokens: &[u32],
    mask: &[u8],
    grads: &mut ModelParams<T>,
) -> Result<(f64, usize), ModelError> {
    let cache = forward_row(params, tokens, None)?;
    let (loss_sum, count) = loss_terms(&cache.logits, tokens, mask);
    if count > 0 {
        backward_row(params, &cache, tokens, mask, grads);
    }
    Ok((loss_sum, count))
}

fn backward_row<T: Real>(
    params: &ModelParams<T>,
    cache: &RowCache<T>,
    tokens: &[u32],
    mask: &[u8],
    grads: &mut ModelParams<T>,
) {
    let cfg = &params.config;
    let t_len = tokens.len();
    let (d, heads, hd) = (cfg.embed_dim, cfg.heads, cfg.head_dim());
    let scale = T::from_f64(1.0 / crate::numeric::f64x::sqrt(hd as f64));
    let rope = match cfg.pos_mode {
        PosMode::Rope => Some(RopeTable::<T>::new(t_len, hd, cfg.rope_base).expect("even head dim")),
        PosMode::Nope => None,
    };

    // d_logits: softmax - onehot at masked next-token positions
    let mut d_logits = Mat::zeros(t_len, cfg.vocab_size);
    for t in 0..t_len.saturating_sub(1) {
        if mask[t + 1] == 1 {
            let row = cache.logits.row(t);
            let lse = log_sum_exp(row);
            let out = d_logits.row_mut(t);
            for (o, &x) in out.iter_mut().zip(row) {
                *o = (x - lse).exp();
            }
            out[tokens[t + 1] as usize] -= T::one();
        }
    }

    // unembedding and final norm
    gemm(T::one(), &cache.final_normed, Op::T, &d_logits, Op::N, T::one(), &mut grads.unembed);
    let mut d_final_normed = Mat::zeros(t_len, d);
    gemm(T::one(), &d_logits, Op::N, &params.unembed, Op::T, T::zero(), &mut d_final_normed);
    let mut dx = Mat::zeros(t_len, d);
    rmsnorm_backward(
        &d_final_normed,
        &cache.final_in,
        &cache.final_inv_rms,
        &params.final_norm,
        &mut grads.final_norm,
        &mut dx,
    );

    for li in (0..cfg.layers).rev() {
        let lp = &params.layers[li];
        let lc = &cache.layers[li];
        let lg = &mut grads.layers[li];
        let hsz = cfg.mlp_hidden;

        // --- MLP block ---
        // x_out = x_mid + act @ w_down; dx flows to both terms
        gemm(T::one(), &lc.act, Op::T, &dx, Op::N, T::one(), &mut lg.w_down);
        let mut d_act = Mat::zeros(t_len, hsz);
        gemm(T::one(), &dx, Op::N, &lp.w_down, Op::T, T::zero(), &mut d_act);

        let mut d_gate = Mat::zeros(t_len, hsz);
        let mut d_up = Mat::zeros(t_len, hsz);
        for i in 0..t_len * hsz {
            let g = lc.gate.data[i];
            let sig = sigmoid(g);
            let dsilu = sig * (T::one() + g * (T::one() - sig));
            d_gate.data[i] = d_act.data[i] * lc.up.data[i] * dsilu;
            d_up.data[i] = d_act.data[i] * lc.gate_act.data[i];
        }
        gemm(T::one(), &lc.mlp_normed, Op::T, &d_gate, Op::N, T::one(), &mut lg.w_gate);
        gemm(T::one(), &lc.mlp_normed, Op::T, &d_up, Op::N, T::one(), &mut lg.w_up);
        let mut d_mlp_normed = Mat::zeros(t_len, d);
        gemm(T::one(), &d_gate, Op::N, &lp.w_gate, Op::T, T::zero(), &mut d_mlp_normed);
        gemm(T::one(), &d_up, Op::N, &lp.w_up, Op::T, T::one(), &mut d_mlp_normed);
        rmsnorm_backward(
            &d_mlp_normed,
            &lc.x_mid,
            &lc.mlp_inv_rms,
            &lp.mlp_norm,
            &mut lg.mlp_norm,
            &mut dx,
        );

        // --- attention block ---
        // x_mid = x_in + ctx @ wo
        gemm(T::one(), &lc.ctx, Op::T, &dx, Op::N, T::one(), &mut lg.wo);
        let mut d_ctx = Mat::zeros(t_len, d);
        gemm(T::one(), &dx, Op::N, &lp.wo, Op::T, T::zero(), &mut d_ctx);

        let mut dq = Mat::zeros(t_len, d);
        let mut dk = Mat::zeros(t_len, d);
        let mut dv = Mat::zeros(t_len, d);
        let mut dp_row: Vec<T> = alloc::vec![T::zero(); t_len];
        for h in 0..heads {
            let lo = h * hd;
            let hi = lo + hd;
            let p = &lc.probs[h];
            for t in 0..t_len {
                let dctx_t = &d_ctx.row(t)[lo..hi];
                let p_row = p.row(t);
                // dP[t][s] and softmax backward in one sweep
                let mut inner = T::zero();
                for s in 0..=t {
                    let dp = dot(dctx_t, &lc.v.row(s)[lo..hi]);
                    dp_row[s] = dp;
                    inner += dp * p_row[s];
                }
                for s in 0..=t {
                    let ds = p_row[s] * (dp_row[s] - inner) * scale;
                    // dq[t] += ds * k[s]; dk[s] += ds * q[t]
                    let qt = &lc.q.row(t)[lo..hi];
                    let ks = &lc.k.row(s)[lo..hi];
                    let dq_t = &mut dq.row_mut(t)[lo..hi];
                    for i in 0..hd {
                        dq_t[i] += ds * ks[i];
                    }
                    let dk_s = &mut dk.row_mut(s)[lo..hi];
                    for i in 0..hd {
                        dk_s[i] += ds * qt[i];
                    }
                    // dv[s] += p[t][s] * dctx[t]
                    let w = p_row[s];
                    let dv_s = &mut dv.row_mut(s)[lo..hi];
                    for i in 0..hd {
                        dv_s[i] += w * dctx_t[i];
                    }
                }
            }
        }

        if let Some(rope) = &rope {
            for t in 0..t_len {
                for h in 0..heads {
                    rope.rotate_inv(&mut dq.row_mut(t)[h * hd..(h + 1) * hd], t);
                    rope.rotate_inv(&mut dk.row_mut(t)[h * hd..(h + 1) * hd], t);
                }
            }
        }

        gemm(T::one(), &lc.attn_normed, Op::T, &dq, Op::N, T::one(), &mut lg.wq);
        gemm(T::one(), &lc.attn_normed, Op::T, &dk, Op::N, T::one(), &mut lg.wk);
        gemm(T::one(), &lc.attn_normed, Op::T, &dv, Op::N, T::one(), &mut lg.wv);
        let mut d_attn_normed = Mat::zeros(t_len, d);
        gemm(T::one(), &dq, Op::N, &lp.wq, Op::T, T::zero(), &mut d_attn_normed);
        gemm(T::one(), &dk, Op::N, &lp.wk, Op::T, T::one(), &mut d_attn_normed);
        gemm(T::one(), &dv, Op::N, &lp.wv, Op::T, T::one(), &mut d_attn_normed);
        rmsnorm_backward(
            &d_attn_normed,
            &lc.x_in,
            &lc.attn_inv_rms,
            &lp.attn_norm,
            &mut lg.attn_norm,
            &mut dx,
        );
    }

    for (t, &tok) in tokens.iter().enumerate() {
        let src = dx.row(t);
        let dst = grads.embed.row_mut(tok as usize);
        for i in 0..d {
            dst[i] += src[i];
        }
    }
}

/// Exact gradient of the mean masked loss over a batch, plus the loss value.
pub fn gradients<T: Real>(
    params: &ModelParams<T>,
    batch: &Batch,
) -> Result<(ModelParams<T>, f64), ModelError> {
    let mut grads = ModelParams::zeros(&params.config);
    let mut loss_sum = 0.0f64;
    let mut count = 0usize;
    for r in 0..batch.rows {
        let (s, c) = accumulate_row_grads(params, batch.row_tokens(r), batch.row_mask(r), &mut grads)?;
        loss_sum += s;
        count += c;
    }
    if count == 0 {
        return Err(ModelError::EmptyMask);
    }
    grads.scale(T::from_f64(1.0 / count as f64));
    Ok((grads, loss_sum / count as f64))
}
