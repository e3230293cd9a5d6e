//! Thread pool setup and shard-parallel gradient accumulation.
//!
//! Gradients are always computed as a fixed number of contiguous row shards
//! folded in shard order, so the result is bitwise identical under any
//! thread count — the shard count (a config value) is part of the numeric
//! recipe, the parallelism is not.

use anyhow::{bail, Result};
use rayon::prelude::*;

use lenxfer_core::model::backward::accumulate_row_grads;
use lenxfer_core::sampler::Batch;
use lenxfer_core::ModelParams;

/// Builds the global rayon pool: explicit request, else LENXFER_THREADS,
/// else rayon's default. Call once at startup; later calls are ignored.
pub fn init_thread_pool(threads: Option<usize>) {
    let n = threads.or_else(|| {
        std::env::var("LENXFER_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

/// Mean-masked-loss gradients over a batch, computed in `shards` fixed
/// chunks. Returns the normalized gradients and the mean loss.
pub fn batch_gradients(
    params: &ModelParams<f32>,
    batch: &Batch,
    shards: usize,
) -> Result<(ModelParams<f32>, f64)> {
    let shards = shards.clamp(1, batch.rows);
    let chunk = batch.rows.div_ceil(shards);
    let ranges: Vec<std::ops::Range<usize>> = (0..shards)
        .map(|s| (s * chunk).min(batch.rows)..((s + 1) * chunk).min(batch.rows))
        .collect();

    let parts: Vec<Result<(ModelParams<f32>, f64, usize)>> = ranges
        .into_par_iter()
        .map(|range| {
            let mut grads = ModelParams::<f32>::zeros(&params.config);
            let mut loss_sum = 0.0f64;
            let mut count = 0usize;
            for r in range {
                let (s, c) =
                    accumulate_row_grads(params, batch.row_tokens(r), batch.row_mask(r), &mut grads)
                        .map_err(anyhow::Error::msg)?;
                loss_sum += s;
                count += c;
            }
            Ok((grads, loss_sum, count))
        })
        .collect();

    let mut total = ModelParams::<f32>::zeros(&params.config);
    let mut loss_sum = 0.0f64;
    let mut count = 0usize;
    for part in parts {
        let (g, s, c) = part?;
        total.add_assign(&g);
        loss_sum += s;
        count += c;
    }
    if count == 0 {
        bail!("batch has no loss-carrying positions");
    }
    total.scale(1.0 / count as f32);
    Ok((total, loss_sum / count as f64))
}
