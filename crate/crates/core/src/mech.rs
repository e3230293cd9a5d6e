//! Mechanistic-analysis suite: attention-matrix differences between tasks
//! and attention-head mean-ablation importance maps.

use alloc::vec::Vec;

use crate::corpus::{make_loss_mask, TaskId, Vocab};
use crate::eval::{argmax, test_sample};
use crate::model::{forward_row, HeadMeanAblation, Mat, ModelError, ModelParams};
use crate::numeric::Real;
use crate::sampler::Batch;
use crate::tasks::TaskError;

#[derive(Debug, Clone, PartialEq)]
pub enum MechError {
    Model(ModelError),
    Task(TaskError),
    ShapeMismatch,
}

impl core::fmt::Display for MechError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MechError::Model(e) => write!(f, "{e}"),
            MechError::Task(e) => write!(f, "{e}"),
            MechError::ShapeMismatch => write!(f, "batch shapes disagree"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MechError {}

impl From<ModelError> for MechError {
    fn from(e: ModelError) -> Self {
        MechError::Model(e)
    }
}

impl From<TaskError> for MechError {
    fn from(e: TaskError) -> Self {
        MechError::Task(e)
    }
}

/// Softmax attention weights for every (row, layer, head); each matrix is
/// seq x seq, row-stochastic up to the causal boundary.
pub fn capture_attention<T: Real>(
    params: &ModelParams<T>,
    batch: &Batch,
) -> Result<Vec<Vec<Vec<Mat<T>>>>, MechError> {
    let mut out = Vec::with_capacity(batch.rows);
    for r in 0..batch.rows {
        let cache = forward_row(params, batch.row_tokens(r), None)?;
        out.push(cache.layers.into_iter().map(|l| l.probs).collect());
    }
    Ok(out)
}

/// Whether per-head L1 attention differences are averaged or summed over
/// batch rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowAggregation {
    #[default]
    Mean,
    Sum,
}

/// Entry-wise absolute attention difference between two same-shape batches:
/// per head, sum over causal positions within both rows' true lengths,
/// aggregated over rows; total = sum over heads.
pub fn attention_matrix_diff<T: Real>(
    params: &ModelParams<T>,
    batch_a: &Batch,
    batch_b: &Batch,
    agg: RowAggregation,
) -> Result<(Mat<f64>, f64), MechError> {
    if batch_a.rows != batch_b.rows || batch_a.width != batch_b.width {
        return Err(MechError::ShapeMismatch);
    }
    let (layers, heads) = (params.config.layers, params.config.heads);
    let mut per_head = Mat::<f64>::zeros(layers, heads);
    for r in 0..batch_a.rows {
        let ca = forward_row(params, batch_a.row_tokens(r), None)?;
        let cb = forward_row(params, batch_b.row_tokens(r), None)?;
        let lmin = batch_a.lens[r].min(batch_b.lens[r]);
        for l in 0..layers {
            for h in 0..heads {
                let (pa, pb) = (&ca.layers[l].probs[h], &cb.layers[l].probs[h]);
                let mut acc = 0.0f64;
                for t in 0..lmin {
                    let (ra, rb) = (pa.row(t), pb.row(t));
                    for s in 0..=t {
                        acc += (ra[s].as_f64() - rb[s].as_f64()).abs();
                    }
                }
                *per_head.at_mut(l, h) += acc;
            }
        }
    }
    if agg == RowAggregation::Mean {
        per_head.scale(1.0 / batch_a.rows as f64);
    }
    let total = per_head.data.iter().sum();
    Ok((per_head, total))
}

/// Layers x heads matrix of accuracy drops under mean ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationMap {
    pub task: TaskId,
    pub iter: u64,
    pub baseline: f64,
    /// drops[layer][head] = baseline accuracy - ablated accuracy.
    pub drops: Mat<f64>,
}

/// Per-(layer, head) mean context profiles over a testset batch, plus the
/// forced token rows the profiles were captured on.
struct AblationFixture<'a, T> {
    rows: &'a [(Vec<u32>, Vec<u8>)],
    /// [layer] -> positionwise mean context [max_len, embed_dim].
    ctx_mean: Vec<Mat<T>>,
    baseline: f64,
}

fn build_fixture<'a, T: Real>(
    params: &ModelParams<T>,
    rows: &'a [(Vec<u32>, Vec<u8>)],
) -> Result<AblationFixture<'a, T>, MechError> {
    let cfg = &params.config;
    let max_len = rows.iter().map(|(t, _)| t.len()).max().unwrap_or(0);
    let mut sums: Vec<Mat<T>> = (0..cfg.layers)
        .map(|_| Mat::zeros(max_len, cfg.embed_dim))
        .collect();
    let mut cover = alloc::vec![0usize; max_len];
    let mut correct = 0usize;
    for (tokens, mask) in rows {
        let cache = forward_row(params, tokens, None)?;
        for (l, sum) in sums.iter_mut().enumerate() {
            let ctx = &cache.layers[l].ctx;
            for t in 0..tokens.len() {
                let dst = sum.row_mut(t);
                for (d, s) in dst.iter_mut().zip(ctx.row(t)) {
                    *d += *s;
                }
            }
        }
        for c in cover.iter_mut().take(tokens.len()) {
            *c += 1;
        }
        if row_exact_match(&cache.logits, tokens, mask) {
            correct += 1;
        }
    }
    for sum in sums.iter_mut() {
        for t in 0..max_len {
            let inv = T::from_f64(1.0 / cover[t].max(1) as f64);
            for x in sum.row_mut(t) {
                *x *= inv;
            }
        }
    }
    Ok(AblationFixture {
        baseline: correct as f64 / rows.len() as f64,
        rows,
        ctx_mean: sums,
    })
}

fn row_exact_match<T: Real>(logits: &Mat<T>, tokens: &[u32], mask: &[u8]) -> bool {
    for t in 0..tokens.len().saturating_sub(1) {
        if mask[t + 1] == 1 && argmax(logits.row(t)) != tokens[t + 1] {
            return false;
        }
    }
    true
}

/// One head ablated at a time: its per-position output is replaced with the
/// mean of that head's output over the batch at the same position, and the
/// exact-match accuracy is recomputed on the same fixed testset. With a
/// batch of one the mean equals the activation itself and every entry is 0.
pub fn mean_ablation_map<T: Real>(
    params: &ModelParams<T>,
    vocab: &Vocab,
    task: TaskId,
    length: u32,
    testset_seed: u64,
    n: usize,
) -> Result<AblationMap, MechError> {
    let mut rows = Vec::with_capacity(n);
    for j in 0..n {
        let s = test_sample(vocab, task, length, testset_seed, j as u64)?;
        let mask = make_loss_mask(vocab, &s);
        let tokens: Vec<u32> = s.input.iter().chain(s.target.iter()).copied().collect();
        rows.push((tokens, mask));
    }
    let (baseline, drops) = mean_ablation_map_over(params, &rows)?;
    Ok(AblationMap {
        task,
        iter: 0,
        baseline,
        drops,
    })
}

/// [`mean_ablation_map`] over explicit (tokens, loss mask) rows.
pub fn mean_ablation_map_over<T: Real>(
    params: &ModelParams<T>,
    rows: &[(Vec<u32>, Vec<u8>)],
) -> Result<(f64, Mat<f64>), MechError> {
    let cfg = &params.config;
    let (layers, heads, hd) = (cfg.layers, cfg.heads, cfg.head_dim());
    let fixture = build_fixture(params, rows)?;

    let mut drops = Mat::<f64>::zeros(layers, heads);
    for l in 0..layers {
        for h in 0..heads {
            let profile = &fixture.ctx_mean[l];
            let mut head_profile = Mat::zeros(profile.rows, hd);
            for t in 0..profile.rows {
                head_profile
                    .row_mut(t)
                    .copy_from_slice(&profile.row(t)[h * hd..(h + 1) * hd]);
            }
            let ablation = HeadMeanAblation {
                layer: l,
                head: h,
                mean_ctx: head_profile,
            };
            let mut correct = 0usize;
            for (tokens, mask) in fixture.rows {
                let cache = forward_row(params, tokens, Some(&ablation))?;
                if row_exact_match(&cache.logits, tokens, mask) {
                    correct += 1;
                }
            }
            let ablated = correct as f64 / fixture.rows.len() as f64;
            *drops.at_mut(l, h) = fixture.baseline - ablated;
        }
    }
    Ok((fixture.baseline, drops))
}

/// Mean entry-wise absolute difference between two ablation maps.
pub fn ablation_map_diff(a: &AblationMap, b: &AblationMap) -> Result<f64, MechError> {
    if a.drops.rows != b.drops.rows || a.drops.cols != b.drops.cols {
        return Err(MechError::ShapeMismatch);
    }
    let sum: f64 = a
        .drops
        .data
        .iter()
        .zip(&b.drops.data)
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(sum / a.drops.data.len() as f64)
}

/// One checkpoint's worth of transfer and mechanism-similarity metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitPoint {
    pub iter: u64,
    pub gap: f64,
    pub attn_diff: f64,
    pub ablation_diff: f64,
}

/// Pearson correlation of each mechanism metric with the gap across
/// checkpoints; None when undefined (fewer than two points, or zero
/// variance).
pub fn series_correlations(points: &[CircuitPoint]) -> (Option<f64>, Option<f64>) {
    let gaps: Vec<f64> = points.iter().map(|p| p.gap).collect();
    let attn: Vec<f64> = points.iter().map(|p| p.attn_diff).collect();
    let abl: Vec<f64> = points.iter().map(|p| p.ablation_diff).collect();
    (
        crate::eval::pearson(&gaps, &attn),
        crate::eval::pearson(&gaps, &abl),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use crate::model::config::ModelConfig;
    use crate::model::params::init_params;
    use crate::sampler::make_batch;

    fn tiny_model() -> ModelParams<f32> {
        let c = ModelConfig::sized(2, 2, 16);
        init_params(&c, 5)
    }

    fn string_batch(vocab: &Vocab, task: TaskId, length: u32, n: usize, seed: u64) -> Batch {
        let samples: Vec<_> = (0..n)
            .map(|j| test_sample(vocab, task, length, seed, j as u64).unwrap())
            .collect();
        make_batch(vocab, &samples, crate::corpus::PAD)
    }

    #[test]
    fn attention_capture_shapes_and_stochasticity() {
        let vocab = build_vocab();
        let p = tiny_model();
        let batch = string_batch(&vocab, TaskId::StringCopy, 6, 3, 0);
        let attn = capture_attention(&p, &batch).unwrap();
        assert_eq!(attn.len(), 3);
        assert_eq!(attn[0].len(), 2); // layers
        assert_eq!(attn[0][0].len(), 2); // heads
        for (r, row) in attn.iter().enumerate() {
            let t_len = batch.lens[r];
            for layer in row {
                for head in layer {
                    assert_eq!((head.rows, head.cols), (t_len, t_len));
                    for t in 0..t_len {
                        let sum: f32 = head.row(t)[..=t].iter().sum();
                        assert!((sum - 1.0).abs() < 1e-5);
                        assert!(head.row(t)[t + 1..].iter().all(|&x| x == 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn attention_diff_self_is_zero_and_symmetric_bounded() {
        let vocab = build_vocab();
        let p = tiny_model();
        let a = string_batch(&vocab, TaskId::StringCopy, 6, 4, 0);
        let (per_head, total) = attention_matrix_diff(&p, &a, &a, RowAggregation::Mean).unwrap();
        assert_eq!(total, 0.0);
        assert!(per_head.data.iter().all(|&x| x == 0.0));

        let b = string_batch(&vocab, TaskId::StringReverse, 6, 4, 0);
        if a.width == b.width {
            let (ab, t_ab) = attention_matrix_diff(&p, &a, &b, RowAggregation::Mean).unwrap();
            let (ba, t_ba) = attention_matrix_diff(&p, &b, &a, RowAggregation::Mean).unwrap();
            assert_eq!(ab, ba);
            assert_eq!(t_ab, t_ba);
            // L1 of two row-stochastic matrices is at most 2 per row
            let max_len = a.lens.iter().max().unwrap();
            assert!(t_ab <= (2 * max_len * p.config.layers * p.config.heads) as f64);
        }
    }

    #[test]
    fn attention_diff_shape_mismatch_errors() {
        let vocab = build_vocab();
        let p = tiny_model();
        let a = string_batch(&vocab, TaskId::StringCopy, 6, 4, 0);
        let b = string_batch(&vocab, TaskId::StringCopy, 6, 3, 0);
        assert!(matches!(
            attention_matrix_diff(&p, &a, &b, RowAggregation::Mean),
            Err(MechError::ShapeMismatch)
        ));
    }

    #[test]
    fn hand_computed_two_row_attention_pair() {
        // Two 2x2 causal stochastic matrices: row 0 fixed [1,0]; rows 1
        // differ by |0.7-0.4|*2 = 0.6 in L1.
        let a = Mat::from_vec(2, 2, alloc::vec![1.0f64, 0.0, 0.7, 0.3]);
        let b = Mat::from_vec(2, 2, alloc::vec![1.0f64, 0.0, 0.4, 0.6]);
        let mut acc = 0.0;
        for t in 0..2 {
            for s in 0..=t {
                acc += (a.at(t, s) - b.at(t, s)).abs();
            }
        }
        assert!((acc - 0.6).abs() < 1e-12);
    }

    #[test]
    fn batch_of_one_mean_ablation_is_noop() {
        let vocab = build_vocab();
        let p = tiny_model();
        let map = mean_ablation_map(&p, &vocab, TaskId::StringCopy, 5, 3, 1).unwrap();
        assert!(map.drops.data.iter().all(|&d| d == 0.0), "{:?}", map.drops);
        assert_eq!((map.drops.rows, map.drops.cols), (2, 2));
    }

    #[test]
    fn ablation_map_diff_hand_cases() {
        let vocab = build_vocab();
        let base = AblationMap {
            task: TaskId::StringCopy,
            iter: 0,
            baseline: 1.0,
            drops: Mat::from_vec(1, 2, alloc::vec![0.2, 0.0]),
        };
        let other = AblationMap {
            drops: Mat::from_vec(1, 2, alloc::vec![0.0, 0.4]),
            ..base.clone()
        };
        assert_eq!(ablation_map_diff(&base, &base).unwrap(), 0.0);
        assert!((ablation_map_diff(&base, &other).unwrap() - 0.3).abs() < 1e-12);
        let ones = AblationMap {
            drops: Mat::from_vec(1, 2, alloc::vec![1.0, 1.0]),
            ..base.clone()
        };
        let zeros = AblationMap {
            drops: Mat::from_vec(1, 2, alloc::vec![0.0, 0.0]),
            ..base.clone()
        };
        assert_eq!(ablation_map_diff(&ones, &zeros).unwrap(), 1.0);
        let wide = AblationMap {
            drops: Mat::zeros(2, 2),
            ..base.clone()
        };
        assert!(ablation_map_diff(&base, &wide).is_err());
        let _ = vocab;
    }

    #[test]
    fn series_correlation_cases() {
        let mk = |vals: &[(f64, f64, f64)]| -> Vec<CircuitPoint> {
            vals.iter()
                .enumerate()
                .map(|(i, &(g, a, b))| CircuitPoint {
                    iter: i as u64,
                    gap: g,
                    attn_diff: a,
                    ablation_diff: b,
                })
                .collect()
        };
        // single checkpoint: undefined
        let (a, b) = series_correlations(&mk(&[(0.5, 0.1, 0.2)]));
        assert_eq!((a, b), (None, None));
        // constant gap: undefined
        let (a, b) = series_correlations(&mk(&[(0.5, 0.1, 0.2), (0.5, 0.3, 0.4)]));
        assert_eq!((a, b), (None, None));
        // gap == ablation diff exactly: correlation 1
        let pts = mk(&[(0.9, 0.5, 0.9), (0.5, 0.2, 0.5), (0.1, 0.4, 0.1)]);
        let (_, abl) = series_correlations(&pts);
        assert!((abl.unwrap() - 1.0).abs() < 1e-12);
    }
}
