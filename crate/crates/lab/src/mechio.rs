//! Checkpoint-wise mechanistic analysis: ablation-map grids, attention
//! differences, and their correlation with the generalization gap.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use lenxfer_core::corpus::{build_vocab, PAD};
use lenxfer_core::eval::{accuracy_curve, generalization_gap, GapMode};
use lenxfer_core::mech::{
    ablation_map_diff, attention_matrix_diff, mean_ablation_map, series_correlations, AblationMap,
    CircuitPoint, RowAggregation,
};
use lenxfer_core::sampler::make_batch_with_width;
use lenxfer_core::{ModelParams, TaskId, Vocab};

use crate::checkpoint::load_checkpoint;
use crate::manifest::csv_header;

pub struct AblateOptions {
    pub main_task: TaskId,
    pub aux_task: TaskId,
    /// Shared length parameter for the attention-difference batches.
    pub length: u32,
    pub gap_lengths: Vec<u32>,
    pub n: usize,
    pub testset_seed: u64,
}

/// Equal-width batches of the two tasks at a shared length parameter.
fn paired_batches(
    vocab: &Vocab,
    a: TaskId,
    b: TaskId,
    length: u32,
    testset_seed: u64,
    n: usize,
) -> Result<(lenxfer_core::sampler::Batch, lenxfer_core::sampler::Batch)> {
    let sa: Vec<_> = (0..n)
        .map(|j| lenxfer_core::eval::test_sample(vocab, a, length, testset_seed, j as u64))
        .collect::<Result<_, _>>()
        .map_err(anyhow::Error::msg)?;
    let sb: Vec<_> = (0..n)
        .map(|j| lenxfer_core::eval::test_sample(vocab, b, length, testset_seed, j as u64))
        .collect::<Result<_, _>>()
        .map_err(anyhow::Error::msg)?;
    let width = sa
        .iter()
        .chain(&sb)
        .map(|s| s.total_len())
        .max()
        .unwrap_or(1);
    Ok((
        make_batch_with_width(vocab, &sa, PAD, width),
        make_batch_with_width(vocab, &sb, PAD, width),
    ))
}

fn write_map_csv(map: &AblationMap, path: &Path, header: &str) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    out.write_all(header.as_bytes())?;
    writeln!(out, "# task: {}  iter: {}  baseline: {}", map.task.name(), map.iter, map.baseline)?;
    // grid layout: one row per layer, one column per head
    for l in 0..map.drops.rows {
        let row: Vec<String> = (0..map.drops.cols)
            .map(|h| format!("{}", map.drops.at(l, h)))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// One checkpoint's gap + mechanism metrics, plus the per-task ablation
/// maps.
pub fn analyze_checkpoint(
    params: &ModelParams<f32>,
    iter: u64,
    opts: &AblateOptions,
) -> Result<(CircuitPoint, AblationMap, AblationMap)> {
    let vocab = build_vocab();
    let main_curve = accuracy_curve(
        params,
        &vocab,
        opts.main_task,
        opts.gap_lengths.iter().copied(),
        opts.testset_seed,
        opts.n,
    )
    .map_err(anyhow::Error::msg)?;
    let aux_curve = accuracy_curve(
        params,
        &vocab,
        opts.aux_task,
        opts.gap_lengths.iter().copied(),
        opts.testset_seed,
        opts.n,
    )
    .map_err(anyhow::Error::msg)?;
    let gap = generalization_gap(&main_curve, &aux_curve, &opts.gap_lengths, GapMode::Clamped)
        .map_err(anyhow::Error::msg)?;

    let (ba, bb) = paired_batches(
        &vocab,
        opts.main_task,
        opts.aux_task,
        opts.length,
        opts.testset_seed,
        opts.n,
    )?;
    let (_, attn_diff) = attention_matrix_diff(params, &ba, &bb, RowAggregation::Mean)
        .map_err(anyhow::Error::msg)?;

    let mut map_main = mean_ablation_map(
        params,
        &vocab,
        opts.main_task,
        opts.length,
        opts.testset_seed,
        opts.n,
    )
    .map_err(anyhow::Error::msg)?;
    map_main.iter = iter;
    let mut map_aux = mean_ablation_map(
        params,
        &vocab,
        opts.aux_task,
        opts.length,
        opts.testset_seed,
        opts.n,
    )
    .map_err(anyhow::Error::msg)?;
    map_aux.iter = iter;
    let abl_diff = ablation_map_diff(&map_main, &map_aux).map_err(anyhow::Error::msg)?;

    Ok((
        CircuitPoint {
            iter,
            gap,
            attn_diff,
            ablation_diff: abl_diff,
        },
        map_main,
        map_aux,
    ))
}

/// Runs the analysis over a set of checkpoints and writes the long-format
/// series CSV, per-checkpoint map grids, and the correlation summary.
pub fn ablate_run(
    checkpoints: &[PathBuf],
    opts: &AblateOptions,
    out_dir: &Path,
    command: &str,
    config_hash: &str,
) -> Result<()> {
    if checkpoints.is_empty() {
        bail!("no checkpoints to analyze");
    }
    std::fs::create_dir_all(out_dir)?;
    let mut points = Vec::new();
    for path in checkpoints {
        let ck = load_checkpoint(path)?;
        let header = csv_header(command, config_hash, ck.data_seed, ck.model_seed);
        let (point, map_main, map_aux) = analyze_checkpoint(&ck.params, ck.iter, opts)?;
        write_map_csv(
            &map_main,
            &out_dir.join(format!("ablation_{}_{:06}.csv", opts.main_task.name(), ck.iter)),
            &header,
        )?;
        write_map_csv(
            &map_aux,
            &out_dir.join(format!("ablation_{}_{:06}.csv", opts.aux_task.name(), ck.iter)),
            &header,
        )?;
        eprintln!(
            "ckpt {:>6}  gap {:.4}  attn_diff {:.4}  ablation_diff {:.4}",
            point.iter, point.gap, point.attn_diff, point.ablation_diff
        );
        points.push(point);
    }

    let header = csv_header(command, config_hash, 0, 0);
    let series_path = out_dir.join("circuit_series.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&series_path)?);
    out.write_all(header.as_bytes())?;
    writeln!(out, "iter,metric,value")?;
    for p in &points {
        writeln!(out, "{},gap,{}", p.iter, p.gap)?;
        writeln!(out, "{},attn_diff,{}", p.iter, p.attn_diff)?;
        writeln!(out, "{},ablation_diff,{}", p.iter, p.ablation_diff)?;
    }
    out.flush()?;

    let (attn_r, abl_r) = series_correlations(&points);
    let fmt = |r: Option<f64>| r.map(|v| format!("{v}")).unwrap_or_else(|| "absent".into());
    let corr_path = out_dir.join("correlations.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&corr_path)?);
    out.write_all(header.as_bytes())?;
    writeln!(out, "metric,pearson_with_gap")?;
    writeln!(out, "attn_diff,{}", fmt(attn_r))?;
    writeln!(out, "ablation_diff,{}", fmt(abl_r))?;
    out.flush()?;
    Ok(())
}
