//! Accuracy-curve CSVs for trained checkpoints.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;

use lenxfer_core::corpus::build_vocab;
use lenxfer_core::eval::{eval_model_at_length, semantic_accuracy_at_length};
use lenxfer_core::{ModelParams, TaskId};

use crate::manifest::csv_header;

pub struct CurveOptions {
    pub task: TaskId,
    pub lengths: Vec<u32>,
    pub n: usize,
    pub testset_seed: u64,
    /// Also score DFS traces by semantic validity.
    pub semantic: bool,
}

/// Evaluates a checkpoint over a length range and writes
/// `task,iter,length,n,exact_match,semantic_match` rows (semantic column
/// empty unless requested for the DFS task).
pub fn write_curve_csv(
    params: &ModelParams<f32>,
    iter: u64,
    opts: &CurveOptions,
    path: &Path,
    command: &str,
    config_hash: &str,
    seeds: (u64, u64),
) -> Result<()> {
    let vocab = build_vocab();
    let semantic = opts.semantic && opts.task == TaskId::DfsTrace;

    let rows: Vec<Result<String>> = opts
        .lengths
        .par_iter()
        .map(|&length| {
            let p = eval_model_at_length(params, &vocab, opts.task, length, opts.testset_seed, opts.n)
                .map_err(anyhow::Error::msg)?;
            let sem = if semantic {
                let v =
                    semantic_accuracy_at_length(params, &vocab, length, opts.testset_seed, opts.n)
                        .map_err(anyhow::Error::msg)?;
                format!("{v}")
            } else {
                String::new()
            };
            Ok(format!(
                "{},{},{},{},{},{}",
                opts.task.name(),
                iter,
                length,
                opts.n,
                p.accuracy,
                sem
            ))
        })
        .collect();

    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    out.write_all(csv_header(command, config_hash, seeds.0, seeds.1).as_bytes())?;
    writeln!(out, "task,iter,length,n,exact_match,semantic_match")?;
    for row in rows {
        writeln!(out, "{}", row?)?;
    }
    out.flush()?;
    Ok(())
}
