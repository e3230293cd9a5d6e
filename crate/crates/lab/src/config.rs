//! Run configuration: TOML schema and conversion to core types.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use lenxfer_core::model::{AdamHyper, LrSchedule};
use lenxfer_core::sampler::{GroupMember, Role, TaskDraw, TaskGroup};
use lenxfer_core::{ModelConfig, PosMode, TaskId};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub train: TrainSection,
    pub tasks: Vec<TaskSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "d_layers")]
    pub layers: usize,
    #[serde(default = "d_heads")]
    pub heads: usize,
    #[serde(default = "d_embed")]
    pub embed_dim: usize,
    /// "rope" or "nope".
    #[serde(default = "d_position")]
    pub position: String,
    #[serde(default = "d_rope_base")]
    pub rope_base: f64,
    #[serde(default = "d_max_seq")]
    pub max_seq_len: usize,
}

fn d_layers() -> usize {
    6
}
fn d_heads() -> usize {
    6
}
fn d_embed() -> usize {
    384
}
fn d_position() -> String {
    "rope".into()
}
fn d_rope_base() -> f64 {
    10000.0
}
fn d_max_seq() -> usize {
    1024
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            layers: d_layers(),
            heads: d_heads(),
            embed_dim: d_embed(),
            position: d_position(),
            rope_base: d_rope_base(),
            max_seq_len: d_max_seq(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default = "d_peak")]
    pub peak_lr: f64,
    #[serde(default = "d_iters")]
    pub iterations: u64,
    #[serde(default = "d_warmup")]
    pub warmup: u64,
    #[serde(default = "d_decay")]
    pub decay: u64,
}

fn d_peak() -> f64 {
    1e-3
}
fn d_iters() -> u64 {
    20000
}
fn d_warmup() -> u64 {
    2000
}
fn d_decay() -> u64 {
    5000
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            peak_lr: d_peak(),
            iterations: d_iters(),
            warmup: d_warmup(),
            decay: d_decay(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default)]
    pub model_seed: u64,
    #[serde(default = "d_ckpt_every")]
    pub checkpoint_every: u64,
    #[serde(default = "d_eval_every")]
    pub eval_every: u64,
    /// Examples per length during training-time evaluation.
    #[serde(default = "d_eval_n")]
    pub eval_n: usize,
    /// Examples per length for the final evaluation.
    #[serde(default = "d_final_eval_n")]
    pub final_eval_n: usize,
    #[serde(default = "d_testset_seed")]
    pub testset_seed: u64,
    /// "per_example" or "per_batch".
    #[serde(default = "d_task_draw")]
    pub task_draw: String,
    /// Fixed gradient-accumulation shard count; part of the numeric recipe,
    /// so results are identical under any thread count.
    #[serde(default = "d_shards")]
    pub grad_shards: usize,
    #[serde(default = "d_wd")]
    pub weight_decay: f64,
    /// Empty = 1..=(group max length)+4.
    #[serde(default)]
    pub eval_lengths: Vec<u32>,
}

fn d_batch() -> usize {
    1024
}
fn d_ckpt_every() -> u64 {
    2000
}
fn d_eval_every() -> u64 {
    500
}
fn d_eval_n() -> usize {
    256
}
fn d_final_eval_n() -> usize {
    1024
}
fn d_testset_seed() -> u64 {
    0x5eed_7e57
}
fn d_task_draw() -> String {
    "per_example".into()
}
fn d_shards() -> usize {
    8
}
fn d_wd() -> f64 {
    0.01
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            batch_size: d_batch(),
            data_seed: 0,
            model_seed: 0,
            checkpoint_every: d_ckpt_every(),
            eval_every: d_eval_every(),
            eval_n: d_eval_n(),
            final_eval_n: d_final_eval_n(),
            testset_seed: d_testset_seed(),
            task_draw: d_task_draw(),
            grad_shards: d_shards(),
            weight_decay: d_wd(),
            eval_lengths: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub task: String,
    /// "main", "auxiliary" or "control".
    pub role: String,
    pub min_length: u32,
    pub max_length: u32,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).context("parsing run config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("serializable config")
    }

    pub fn validate(&self) -> Result<()> {
        self.task_group()?;
        self.model_config()?.validate().map_err(anyhow::Error::msg)?;
        if !self.lr_schedule().validate() {
            bail!("schedule: warmup + decay exceed total iterations");
        }
        if self.train.batch_size == 0 || self.train.grad_shards == 0 {
            bail!("batch size and grad shards must be positive");
        }
        self.task_draw()?;
        Ok(())
    }

    pub fn task_group(&self) -> Result<TaskGroup> {
        let mut members = Vec::new();
        for t in &self.tasks {
            let task = TaskId::from_name(&t.task)
                .with_context(|| format!("unknown task '{}'", t.task))?;
            let role = Role::from_name(&t.role)
                .with_context(|| format!("unknown role '{}'", t.role))?;
            members.push(GroupMember {
                task,
                min_length: t.min_length,
                max_length: t.max_length,
                role,
            });
        }
        TaskGroup::new(members).map_err(anyhow::Error::msg)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let pos_mode = match self.model.position.as_str() {
            "rope" => PosMode::Rope,
            "nope" => PosMode::Nope,
            other => bail!("unknown position mode '{other}' (expected rope|nope)"),
        };
        Ok(ModelConfig {
            layers: self.model.layers,
            heads: self.model.heads,
            embed_dim: self.model.embed_dim,
            pos_mode,
            rope_base: self.model.rope_base,
            max_seq_len: self.model.max_seq_len,
            mlp_hidden: lenxfer_core::model::config::default_mlp_hidden(self.model.embed_dim),
            ..ModelConfig::default()
        })
    }

    pub fn lr_schedule(&self) -> LrSchedule {
        LrSchedule {
            peak: self.schedule.peak_lr,
            warmup: self.schedule.warmup,
            total: self.schedule.iterations,
            decay: self.schedule.decay,
        }
    }

    pub fn adam_hyper(&self) -> AdamHyper {
        AdamHyper {
            weight_decay: self.train.weight_decay,
            ..AdamHyper::default()
        }
    }

    pub fn task_draw(&self) -> Result<TaskDraw> {
        match self.train.task_draw.as_str() {
            "per_example" => Ok(TaskDraw::PerExample),
            "per_batch" => Ok(TaskDraw::PerBatch),
            other => bail!("unknown task_draw '{other}' (expected per_example|per_batch)"),
        }
    }

    /// Lengths evaluated during and after training.
    pub fn eval_lengths(&self) -> Vec<u32> {
        if !self.train.eval_lengths.is_empty() {
            return self.train.eval_lengths.clone();
        }
        let hi = self.tasks.iter().map(|t| t.max_length).max().unwrap_or(1);
        let lo = self.tasks.iter().map(|t| t.min_length).min().unwrap_or(1);
        (lo..=hi + 4).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"
[model]
layers = 2
heads = 4
embed_dim = 128

[schedule]
iterations = 2000
warmup = 200
decay = 500

[train]
batch_size = 64
eval_lengths = [1, 2, 3, 4, 5, 6]

[[tasks]]
task = "reverse_add"
role = "main"
min_length = 1
max_length = 6
"#;

    #[test]
    fn parses_and_converts() {
        let cfg = RunConfig::from_toml(SMOKE).unwrap();
        let mc = cfg.model_config().unwrap();
        assert_eq!((mc.layers, mc.heads, mc.embed_dim), (2, 4, 128));
        assert_eq!(mc.vocab_size, 139);
        let group = cfg.task_group().unwrap();
        assert_eq!(group.members.len(), 1);
        assert_eq!(group.members[0].task, TaskId::ReverseAdd);
        assert_eq!(cfg.eval_lengths(), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn defaults_follow_published_hyperparameters() {
        let cfg = RunConfig::from_toml(
            "[[tasks]]\ntask = \"reverse_add\"\nrole = \"main\"\nmin_length = 1\nmax_length = 16\n",
        )
        .unwrap();
        assert_eq!(cfg.train.batch_size, 1024);
        let s = cfg.lr_schedule();
        assert_eq!((s.peak, s.total, s.warmup, s.decay), (1e-3, 20000, 2000, 5000));
        let mc = cfg.model_config().unwrap();
        assert_eq!((mc.layers, mc.heads, mc.embed_dim), (6, 6, 384));
    }

    #[test]
    fn unknown_fields_and_values_rejected() {
        assert!(RunConfig::from_toml("[bogus]\nx = 1\n[[tasks]]\ntask=\"reverse_add\"\nrole=\"main\"\nmin_length=1\nmax_length=4\n").is_err());
        let bad_task = SMOKE.replace("reverse_add", "quicksort");
        assert!(RunConfig::from_toml(&bad_task).is_err());
        let bad_pos = SMOKE.replace("[schedule]", "position = \"alibi\"\n[schedule]");
        assert!(RunConfig::from_toml(&bad_pos).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::from_toml(SMOKE).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn derived_eval_lengths_extend_past_group_max() {
        let cfg = RunConfig::from_toml(
            "[[tasks]]\ntask = \"string_copy\"\nrole = \"main\"\nmin_length = 1\nmax_length = 8\n",
        )
        .unwrap();
        assert_eq!(cfg.eval_lengths(), (1..=12).collect::<Vec<_>>());
    }
}
