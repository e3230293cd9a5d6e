//! Main-length x auxiliary-length sweep driver: trains one run per grid
//! cell and seed, evaluates both curves, and emits the gap grid CSV.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Result};

use lenxfer_core::corpus::build_vocab;
use lenxfer_core::eval::{accuracy_curve, generalization_gap, AccuracyCurve, GapMode};
use lenxfer_core::sampler::Role;

use crate::checkpoint::load_checkpoint;
use crate::config::RunConfig;
use crate::manifest::{config_hash, csv_header};
use crate::trainer::train_run;

#[derive(Debug, Clone)]
pub struct SweepPlan {
    /// Training-length grid for both axes (the published grid is
    /// 4,8,...,256).
    pub lengths: Vec<u32>,
    pub seeds: Vec<u64>,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            lengths: vec![4, 8, 16, 32, 64, 128, 256],
            seeds: vec![0, 1, 2],
        }
    }
}

impl SweepPlan {
    pub fn cells(&self) -> Vec<(u32, u32, u64)> {
        let mut out = Vec::new();
        for &main_len in &self.lengths {
            for &aux_len in &self.lengths {
                for &seed in &self.seeds {
                    out.push((main_len, aux_len, seed));
                }
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        let mut s = String::new();
        s.push_str("main_len,aux_len,seed\n");
        for (m, a, seed) in self.cells() {
            s.push_str(&format!("{m},{a},{seed}\n"));
        }
        s
    }
}

/// A copy of the base config with the main range set to [1, main_len], all
/// auxiliary/control ranges to [1, aux_len], and the model seed replaced.
pub fn cell_config(base: &RunConfig, main_len: u32, aux_len: u32, seed: u64) -> RunConfig {
    let mut cfg = base.clone();
    for t in cfg.tasks.iter_mut() {
        let role = Role::from_name(&t.role).unwrap_or(Role::Auxiliary);
        t.min_length = 1;
        t.max_length = if role == Role::Main { main_len } else { aux_len };
    }
    cfg.train.model_seed = seed;
    cfg.train.eval_lengths = Vec::new(); // re-derive from the new ranges
    cfg
}

/// Trains every cell and appends `main_len,aux_len,seed,gap` rows.
pub fn sweep_run(
    base: &RunConfig,
    plan: &SweepPlan,
    out_dir: &Path,
    command: &str,
) -> Result<()> {
    let group = base.task_group()?;
    if group.main().is_none() {
        bail!("sweep needs a task with role = \"main\"");
    }
    let aux_tasks: Vec<_> = group
        .members
        .iter()
        .filter(|m| m.role == Role::Auxiliary)
        .map(|m| m.task)
        .collect();
    if aux_tasks.is_empty() {
        bail!("sweep needs at least one auxiliary task");
    }
    let main_task = group.main().unwrap().task;

    std::fs::create_dir_all(out_dir)?;
    let gap_path = out_dir.join("gap.csv");
    let mut gap_file = std::io::BufWriter::new(std::fs::File::create(&gap_path)?);
    gap_file.write_all(
        csv_header(command, &config_hash(&base.to_toml()), base.train.data_seed, 0).as_bytes(),
    )?;
    writeln!(gap_file, "main_len,aux_len,seed,gap")?;

    let vocab = build_vocab();
    for (main_len, aux_len, seed) in plan.cells() {
        let cfg = cell_config(base, main_len, aux_len, seed);
        let run_dir = out_dir.join(format!("m{main_len}_a{aux_len}_s{seed}"));
        let out = train_run(&cfg, &run_dir, None, command)?;
        let ck = load_checkpoint(&out.final_checkpoint)?;

        let lengths: Vec<u32> = (1..=main_len.max(aux_len) + 4).collect();
        let n = cfg.train.final_eval_n;
        let seed_ts = cfg.train.testset_seed;
        let main_curve = accuracy_curve(
            &ck.params, &vocab, main_task, lengths.iter().copied(), seed_ts, n,
        )
        .map_err(anyhow::Error::msg)?;
        let aux_curves: Vec<AccuracyCurve> = aux_tasks
            .iter()
            .map(|&t| {
                accuracy_curve(&ck.params, &vocab, t, lengths.iter().copied(), seed_ts, n)
                    .map_err(anyhow::Error::msg)
            })
            .collect::<Result<_>>()?;
        let aux_curve = AccuracyCurve::mean_of(&aux_curves).expect("nonempty aux curves");
        let gap = generalization_gap(&main_curve, &aux_curve, &lengths, GapMode::Clamped)
            .map_err(anyhow::Error::msg)?;
        writeln!(gap_file, "{main_len},{aux_len},{seed},{gap}")?;
        gap_file.flush()?;
        eprintln!("cell main {main_len} aux {aux_len} seed {seed}: gap {gap:.4}");
    }
    Ok(())
}
