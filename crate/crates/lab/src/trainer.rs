//! Training-run orchestration: iteration loop, checkpoint cadence,
//! evaluation cadence, metrics logs and the run manifest.
//!
//! Runs are a pure function of (config, data seed, model seed): the data
//! stream is counter-indexed, gradient accumulation uses a fixed shard
//! fold, and every log is keyed by iteration, never wall clock.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use lenxfer_core::corpus::build_vocab;
use lenxfer_core::eval::eval_model_at_length;
use lenxfer_core::model::{adamw_step, lr_at, init_params, OptimizerState};
use lenxfer_core::sampler::{training_batch, GroupMember, TaskGroup};
use lenxfer_core::{ModelParams, Vocab};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::RunConfig;
use crate::manifest::{config_hash, csv_header, RunManifest};
use crate::par::batch_gradients;

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub final_checkpoint: PathBuf,
    pub metrics_path: PathBuf,
    pub regimes_path: PathBuf,
    pub checkpoints: Vec<(u64, PathBuf)>,
}

/// Evaluation regimes relative to a member's own training range and the
/// group's auxiliary maximum.
fn regime(member: &GroupMember, aux_max: u32, length: u32) -> &'static str {
    if length <= member.max_length {
        "in_range"
    } else if length <= aux_max {
        "transfer"
    } else {
        "beyond"
    }
}

struct EvalRow {
    iter: u64,
    task: &'static str,
    length: u32,
    accuracy: f64,
    loss: f64,
    regime: &'static str,
}

fn eval_group(
    params: &ModelParams<f32>,
    vocab: &Vocab,
    group: &TaskGroup,
    lengths: &[u32],
    testset_seed: u64,
    n: usize,
    iter: u64,
) -> Result<Vec<EvalRow>> {
    let aux_max = group
        .max_aux_length()
        .or_else(|| group.members.iter().map(|m| m.max_length).max())
        .unwrap_or(0);
    let mut jobs = Vec::new();
    for member in &group.members {
        for &length in lengths {
            jobs.push((member, length));
        }
    }
    let points: Vec<Result<EvalRow>> = jobs
        .into_par_iter()
        .map(|(member, length)| {
            let p = eval_model_at_length(params, vocab, member.task, length, testset_seed, n)
                .map_err(anyhow::Error::msg)?;
            Ok(EvalRow {
                iter,
                task: member.task.name(),
                length,
                accuracy: p.accuracy,
                loss: p.loss,
                regime: regime(member, aux_max, length),
            })
        })
        .collect();
    points.into_iter().collect()
}

fn write_metric_rows(
    metrics: &mut impl Write,
    regimes: &mut impl Write,
    rows: &[EvalRow],
    group: &TaskGroup,
) -> Result<()> {
    for r in rows {
        writeln!(
            metrics,
            "{},{},{},{},{}",
            r.iter, r.task, r.length, r.accuracy, r.loss
        )?;
    }
    // three-regime aggregates per task
    for member in &group.members {
        for reg in ["in_range", "transfer", "beyond"] {
            let accs: Vec<f64> = rows
                .iter()
                .filter(|r| r.task == member.task.name() && r.regime == reg)
                .map(|r| r.accuracy)
                .collect();
            if !accs.is_empty() {
                let mean = accs.iter().sum::<f64>() / accs.len() as f64;
                writeln!(
                    regimes,
                    "{},{},{},{}",
                    rows[0].iter,
                    member.task.name(),
                    reg,
                    mean
                )?;
            }
        }
    }
    Ok(())
}

pub fn checkpoint_path(out_dir: &Path, iter: u64) -> PathBuf {
    out_dir.join(format!("ckpt_{iter:06}.bin"))
}

/// Executes (or resumes) one training run, writing checkpoints, metrics and
/// a manifest under `out_dir`.
pub fn train_run(
    cfg: &RunConfig,
    out_dir: &Path,
    resume_from: Option<&Path>,
    command: &str,
) -> Result<TrainOutput> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let vocab = build_vocab();
    let group = cfg.task_group()?;
    let model_config = cfg.model_config()?;
    let schedule = cfg.lr_schedule();
    let draw = cfg.task_draw()?;
    let lengths = cfg.eval_lengths();
    let t = &cfg.train;

    let mut manifest = RunManifest::new(command, &cfg.to_toml(), t.data_seed, t.model_seed);
    manifest.write(out_dir)?;
    fs::write(out_dir.join("vocab.txt"), vocab.dump())?;

    let (mut params, mut opt, start_iter) = match resume_from {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            if ck.params.config != model_config {
                bail!("checkpoint model config disagrees with run config");
            }
            if ck.data_seed != t.data_seed || ck.model_seed != t.model_seed {
                bail!(
                    "checkpoint seeds (data {}, model {}) disagree with config",
                    ck.data_seed,
                    ck.model_seed
                );
            }
            (ck.params, ck.opt, ck.iter)
        }
        None => {
            let params: ModelParams<f32> = init_params(&model_config, t.model_seed);
            let opt = OptimizerState::new(&params, cfg.adam_hyper());
            (params, opt, 0)
        }
    };
    if start_iter >= schedule.total {
        bail!("checkpoint already at or past the configured iteration count");
    }

    let metrics_path = out_dir.join("metrics.csv");
    let regimes_path = out_dir.join("regimes.csv");
    let header = csv_header(command, &config_hash(&cfg.to_toml()), t.data_seed, t.model_seed);
    let fresh = start_iter == 0;
    let mut metrics = open_log(&metrics_path, fresh, &header, "iter,task,length,accuracy,loss")?;
    let mut regimes = open_log(&regimes_path, fresh, &header, "iter,task,regime,accuracy")?;

    let mut checkpoints = Vec::new();
    for iter in start_iter..schedule.total {
        let batch = training_batch(&group, &vocab, t.data_seed, iter, t.batch_size, draw)
            .map_err(anyhow::Error::msg)?;
        let (grads, loss) = batch_gradients(&params, &batch, t.grad_shards)?;
        if !loss.is_finite() {
            bail!(
                "training diverged: loss {loss} at iteration {iter} (data_seed {}, model_seed {})",
                t.data_seed,
                t.model_seed
            );
        }
        let lr = lr_at(iter, &schedule);
        adamw_step(&mut params, &grads, &mut opt, lr);

        let done = iter + 1;
        if done % t.eval_every == 0 || done == schedule.total {
            let n = if done == schedule.total { t.final_eval_n } else { t.eval_n };
            let rows = eval_group(&params, &vocab, &group, &lengths, t.testset_seed, n, done)?;
            write_metric_rows(&mut metrics, &mut regimes, &rows, &group)?;
            metrics.flush()?;
            regimes.flush()?;
            let main_acc = rows
                .iter()
                .filter(|r| r.regime == "in_range")
                .map(|r| r.accuracy)
                .sum::<f64>()
                / rows.iter().filter(|r| r.regime == "in_range").count().max(1) as f64;
            eprintln!(
                "iter {done:>6}  loss {loss:.4}  lr {lr:.2e}  in-range acc {main_acc:.3}"
            );
        }
        if done % t.checkpoint_every == 0 || done == schedule.total {
            let path = checkpoint_path(out_dir, done);
            save_checkpoint(
                &Checkpoint {
                    params: params.clone(),
                    opt: opt.clone(),
                    iter: done,
                    data_seed: t.data_seed,
                    model_seed: t.model_seed,
                },
                &path,
            )?;
            checkpoints.push((done, path));
        }
    }

    let final_checkpoint = checkpoint_path(out_dir, schedule.total);
    manifest.artifacts = vec![
        "metrics.csv".into(),
        "regimes.csv".into(),
        final_checkpoint
            .file_name()
            .unwrap()
            .to_string_lossy()
            .into_owned(),
    ];
    manifest.complete = true;
    manifest.write(out_dir)?;

    Ok(TrainOutput {
        final_checkpoint,
        metrics_path,
        regimes_path,
        checkpoints,
    })
}

fn open_log(
    path: &Path,
    fresh: bool,
    header: &str,
    columns: &str,
) -> Result<std::io::BufWriter<fs::File>> {
    let file = if fresh {
        let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        f.write_all(header.as_bytes())?;
        writeln!(f, "{columns}")?;
        f
    } else {
        fs::OpenOptions::new()
            .append(true)
            .open(path)
            .with_context(|| format!("appending to {}", path.display()))?
    };
    Ok(std::io::BufWriter::new(file))
}
