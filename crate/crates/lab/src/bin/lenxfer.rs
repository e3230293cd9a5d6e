//! Command-line entry point: dataset generation, training, evaluation,
//! length sweeps, head-ablation analysis and report merging.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lenxfer::checkpoint::load_checkpoint;
use lenxfer::config::RunConfig;
use lenxfer::dataset::generate_jsonl;
use lenxfer::evalio::{write_curve_csv, CurveOptions};
use lenxfer::manifest::config_hash;
use lenxfer::mechio::{ablate_run, AblateOptions};
use lenxfer::par::init_thread_pool;
use lenxfer::report::report_run;
use lenxfer::sweep::{sweep_run, SweepPlan};
use lenxfer::trainer::train_run;
use lenxfer_core::TaskId;

#[derive(Parser)]
#[command(name = "lenxfer", version, about = "Length-generalization transfer lab")]
struct Cli {
    /// Cap worker threads (also via LENXFER_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Pin execution to one thread. Runs are bitwise reproducible either
    /// way; this removes even scheduling variation.
    #[arg(long, global = true)]
    strict_deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a JSONL dataset for one task at one length.
    Gen(GenArgs),
    /// Train a run from a config file.
    Train(TrainArgs),
    /// Evaluate a checkpoint into an accuracy-curve CSV.
    Eval(EvalArgs),
    /// Train the (main length x aux length) grid and emit gap.csv.
    Sweep(SweepArgs),
    /// Attention-head analysis over a run's checkpoints.
    Ablate(AblateArgs),
    /// Merge a run directory's artifacts into summary tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    task: String,
    #[arg(long)]
    length: u32,
    #[arg(short = 'n', long, default_value_t = 1024)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "dataset.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "runs/run")]
    out: PathBuf,
    /// Override the model-init seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the data-stream seed.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Resume from a checkpoint file.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    task: String,
    /// Inclusive range "lo..hi" or comma list "1,2,3".
    #[arg(long, default_value = "1..36")]
    lengths: String,
    #[arg(short = 'n', long, default_value_t = 1024)]
    count: usize,
    #[arg(long, default_value_t = 0x5eed_7e57)]
    testset_seed: u64,
    /// Also score DFS traces by semantic validity.
    #[arg(long)]
    semantic: bool,
    #[arg(long, default_value = "curve.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "runs/sweep")]
    out: PathBuf,
    /// Grid lengths, comma separated.
    #[arg(long, default_value = "4,8,16,32,64,128,256")]
    lengths: String,
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    /// Print the planned (main, aux, seed) grid without training.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct AblateArgs {
    /// Run directory containing ckpt_*.bin files.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    main_task: String,
    #[arg(long)]
    aux_task: String,
    /// Shared instance length for attention comparison and ablation.
    #[arg(long, default_value_t = 8)]
    length: u32,
    /// Gap evaluation lengths.
    #[arg(long, default_value = "1..12")]
    lengths: String,
    #[arg(short = 'n', long, default_value_t = 256)]
    count: usize,
    #[arg(long, default_value_t = 0x5eed_7e57)]
    testset_seed: u64,
    #[arg(long, default_value = "runs/ablate")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run or sweep directory.
    #[arg(long)]
    run: PathBuf,
}

fn parse_lengths(spec: &str) -> Result<Vec<u32>> {
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u32 = lo.parse().context("range start")?;
        let hi: u32 = hi.parse().context("range end")?;
        if lo == 0 || hi < lo {
            bail!("bad length range {spec}");
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<u32>().map_err(anyhow::Error::from))
        .collect()
}

fn parse_task(name: &str) -> Result<TaskId> {
    TaskId::from_name(name).with_context(|| {
        let known: Vec<&str> = TaskId::ALL.iter().map(|t| t.name()).collect();
        format!("unknown task '{name}'; expected one of {}", known.join(", "))
    })
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = if cli.strict_deterministic { Some(1) } else { cli.threads };
    init_thread_pool(threads);
    let cmd = command_line();

    match cli.command {
        Command::Gen(a) => {
            let task = parse_task(&a.task)?;
            generate_jsonl(task, a.length, a.count, a.seed, &a.out, &cmd)?;
            println!("{}", a.out.display());
        }
        Command::Train(a) => {
            let mut cfg = RunConfig::load(&a.config)?;
            if let Some(seed) = a.seed {
                cfg.train.model_seed = seed;
            }
            if let Some(seed) = a.data_seed {
                cfg.train.data_seed = seed;
            }
            let out = train_run(&cfg, &a.out, a.checkpoint.as_deref(), &cmd)?;
            println!("{}", out.final_checkpoint.display());
        }
        Command::Eval(a) => {
            let task = parse_task(&a.task)?;
            let ck = load_checkpoint(&a.checkpoint)?;
            let opts = CurveOptions {
                task,
                lengths: parse_lengths(&a.lengths)?,
                n: a.count,
                testset_seed: a.testset_seed,
                semantic: a.semantic,
            };
            write_curve_csv(
                &ck.params,
                ck.iter,
                &opts,
                &a.out,
                &cmd,
                &config_hash(&format!("{:?}", ck.params.config)),
                (ck.data_seed, ck.model_seed),
            )?;
            println!("{}", a.out.display());
        }
        Command::Sweep(a) => {
            let cfg = RunConfig::load(&a.config)?;
            let plan = SweepPlan {
                lengths: parse_lengths(&a.lengths)?,
                seeds: (0..a.seeds).collect(),
            };
            if a.dry_run {
                print!("{}", plan.describe());
                return Ok(());
            }
            sweep_run(&cfg, &plan, &a.out, &cmd)?;
            println!("{}", a.out.join("gap.csv").display());
        }
        Command::Ablate(a) => {
            let mut checkpoints: Vec<PathBuf> = std::fs::read_dir(&a.run)
                .with_context(|| format!("reading {}", a.run.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|f| f.to_str())
                        .is_some_and(|f| f.starts_with("ckpt_") && f.ends_with(".bin"))
                })
                .collect();
            checkpoints.sort();
            let opts = AblateOptions {
                main_task: parse_task(&a.main_task)?,
                aux_task: parse_task(&a.aux_task)?,
                length: a.length,
                gap_lengths: parse_lengths(&a.lengths)?,
                n: a.count,
                testset_seed: a.testset_seed,
            };
            ablate_run(&checkpoints, &opts, &a.out, &cmd, "")?;
            println!("{}", a.out.join("circuit_series.csv").display());
        }
        Command::Report(a) => {
            let summary = report_run(&a.run)?;
            print!("{summary}");
        }
    }
    Ok(())
}
