//! Greedy decoding, per-length exact-match accuracy, accuracy curves, and
//! the generalization-gap metric.
//!
//! Exact match is scored teacher-forced: an instance counts as correct when
//! the argmax prediction is right at every loss-carrying position given the
//! ground-truth context. For every task whose mask covers the whole target
//! (all but MQAR) this is provably identical to greedy-decoding the prompt
//! and comparing the full output: the first wrong greedy token is also a
//! wrong teacher-forced argmax, and vice versa. For MQAR — where only
//! answer characters carry loss and the echoes are context — it is the only
//! reading under which the task is scoreable at all.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::corpus::{make_loss_mask, Sample, TaskId, Vocab, EOS};
use crate::model::{decode::decode_step, forward_row, KvCache, ModelError, ModelParams};
use crate::numeric::Real;
use crate::rng::test_instance_rng;
use crate::sampler::TaskGroup;
use crate::tasks::{encode_instance, maze, sample_instance, TaskError};

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    MissingLength(u32),
    Model(ModelError),
    Task(TaskError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::MissingLength(l) => write!(f, "curve has no point at length {l}"),
            EvalError::Model(e) => write!(f, "{e}"),
            EvalError::Task(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EvalError {}

impl From<ModelError> for EvalError {
    fn from(e: ModelError) -> Self {
        EvalError::Model(e)
    }
}

impl From<TaskError> for EvalError {
    fn from(e: TaskError) -> Self {
        EvalError::Task(e)
    }
}

/// Anything that can be scored like a model. Lets tests swap in oracle or
/// noise stubs for the evaluation pipeline itself.
pub trait Predictor {
    /// Argmax prediction at every loss-carrying position, teacher-forced.
    /// Returns one token per masked position, in sequence order.
    fn predict_masked(&self, tokens: &[u32], mask: &[u8]) -> Result<Vec<u32>, ModelError>;
}

impl<T: Real> Predictor for ModelParams<T> {
    fn predict_masked(&self, tokens: &[u32], mask: &[u8]) -> Result<Vec<u32>, ModelError> {
        let cache = forward_row(self, tokens, None)?;
        let mut out = Vec::new();
        for t in 0..tokens.len().saturating_sub(1) {
            if mask[t + 1] == 1 {
                out.push(argmax(cache.logits.row(t)));
            }
        }
        Ok(out)
    }
}

/// Lowest index among maximal entries (deterministic tie-break).
pub fn argmax<T: Real>(row: &[T]) -> u32 {
    let mut best = 0usize;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best as u32
}

/// Argmax next-token decoding until EOS or the cap; ties broken by lowest
/// token id. The returned tokens include the terminating EOS when produced.
pub fn greedy_decode<T: Real>(
    params: &ModelParams<T>,
    prompt: &[u32],
    max_new_tokens: usize,
) -> Result<Vec<u32>, ModelError> {
    let mut cache = KvCache::new(params)?;
    let mut logits = Vec::new();
    for &tok in prompt {
        logits = decode_step(params, &mut cache, tok)?;
    }
    let mut out = Vec::new();
    for _ in 0..max_new_tokens {
        let next = argmax(&logits);
        out.push(next);
        if next == EOS {
            break;
        }
        logits = decode_step(params, &mut cache, next)?;
    }
    Ok(out)
}

/// The fixed test instance `index` of (task, length) under a testset seed.
pub fn test_sample(
    vocab: &Vocab,
    task: TaskId,
    length: u32,
    testset_seed: u64,
    index: u64,
) -> Result<Sample, TaskError> {
    let mut rng = test_instance_rng(testset_seed, task.tag(), length as u64, index);
    let inst = sample_instance(task, length, &mut rng)?;
    encode_instance(vocab, &inst)
}

/// True iff every masked-position argmax matches the target.
pub fn exact_match<P: Predictor + ?Sized>(
    predictor: &P,
    vocab: &Vocab,
    sample: &Sample,
) -> Result<bool, EvalError> {
    let mask = make_loss_mask(vocab, sample);
    let tokens: Vec<u32> = sample
        .input
        .iter()
        .chain(sample.target.iter())
        .copied()
        .collect();
    let preds = predictor.predict_masked(&tokens, &mask)?;
    let mut pi = 0;
    for t in 0..tokens.len().saturating_sub(1) {
        if mask[t + 1] == 1 {
            if preds[pi] != tokens[t + 1] {
                return Ok(false);
            }
            pi += 1;
        }
    }
    Ok(true)
}

/// Exact-match fraction over `n` fixed-seed instances.
pub fn accuracy_at_length<P: Predictor + ?Sized>(
    predictor: &P,
    vocab: &Vocab,
    task: TaskId,
    length: u32,
    testset_seed: u64,
    n: usize,
) -> Result<f64, EvalError> {
    let mut correct = 0usize;
    for j in 0..n {
        let sample = test_sample(vocab, task, length, testset_seed, j as u64)?;
        if exact_match(predictor, vocab, &sample)? {
            correct += 1;
        }
    }
    Ok(correct as f64 / n as f64)
}

/// Accuracy plus mean masked loss in one forward per instance (the trainer's
/// evaluation path).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub accuracy: f64,
    pub loss: f64,
    pub n: usize,
}

pub fn eval_model_at_length<T: Real>(
    params: &ModelParams<T>,
    vocab: &Vocab,
    task: TaskId,
    length: u32,
    testset_seed: u64,
    n: usize,
) -> Result<EvalPoint, EvalError> {
    let mut correct = 0usize;
    let mut loss_sum = 0.0f64;
    let mut loss_count = 0usize;
    for j in 0..n {
        let sample = test_sample(vocab, task, length, testset_seed, j as u64)?;
        let mask = make_loss_mask(vocab, &sample);
        let tokens: Vec<u32> = sample
            .input
            .iter()
            .chain(sample.target.iter())
            .copied()
            .collect();
        let cache = forward_row(params, &tokens, None)?;
        let (s, c) = crate::model::backward::loss_terms(&cache.logits, &tokens, &mask);
        loss_sum += s;
        loss_count += c;
        let mut ok = true;
        for t in 0..tokens.len() - 1 {
            if mask[t + 1] == 1 && argmax(cache.logits.row(t)) != tokens[t + 1] {
                ok = false;
                break;
            }
        }
        if ok {
            correct += 1;
        }
    }
    Ok(EvalPoint {
        accuracy: correct as f64 / n as f64,
        loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { f64::NAN },
        n,
    })
}

/// DFS-trace semantic score: greedy-decode the prompt and accept any valid
/// traversal of the instance's maze, not just the sampled target.
pub fn semantic_accuracy_at_length<T: Real>(
    params: &ModelParams<T>,
    vocab: &Vocab,
    length: u32,
    testset_seed: u64,
    n: usize,
) -> Result<f64, EvalError> {
    let mut valid = 0usize;
    for j in 0..n {
        let mut rng = test_instance_rng(testset_seed, TaskId::DfsTrace.tag(), length as u64, j as u64);
        let inst = sample_instance(TaskId::DfsTrace, length, &mut rng)?;
        let sample = encode_instance(vocab, &inst)?;
        let cap = sample.target.len() + 16;
        let out = greedy_decode(params, &sample.input, cap)?;
        let text = vocab.decode(&out).map_err(TaskError::from)?;
        let Some(g) = maze::parse_instance(maze::GRID_8X8, &inst.input) else {
            continue;
        };
        if let Some(trace) = maze::parse_trace(&text) {
            if maze::validate_dfs_trace(&g, g.start, g.goal, &trace) {
                valid += 1;
            }
        }
    }
    Ok(valid as f64 / n as f64)
}

/// Per-length exact-match accuracy for one task at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCurve {
    pub task: TaskId,
    pub iter: u64,
    /// (length, accuracy, n), lengths strictly increasing.
    pub points: Vec<(u32, f64, usize)>,
}

impl AccuracyCurve {
    pub fn accuracy_at(&self, length: u32) -> Option<f64> {
        self.points
            .iter()
            .find(|(l, _, _)| *l == length)
            .map(|&(_, a, _)| a)
    }

    /// Pointwise mean of several curves (for multi-auxiliary groups).
    pub fn mean_of(curves: &[AccuracyCurve]) -> Option<AccuracyCurve> {
        let first = curves.first()?;
        let mut points = Vec::new();
        for &(l, _, n) in &first.points {
            let mut sum = 0.0;
            for c in curves {
                sum += c.accuracy_at(l)?;
            }
            points.push((l, sum / curves.len() as f64, n));
        }
        Some(AccuracyCurve {
            task: first.task,
            iter: first.iter,
            points,
        })
    }
}

pub fn accuracy_curve<P: Predictor + ?Sized>(
    predictor: &P,
    vocab: &Vocab,
    task: TaskId,
    lengths: impl IntoIterator<Item = u32>,
    testset_seed: u64,
    n: usize,
) -> Result<AccuracyCurve, EvalError> {
    let mut points = Vec::new();
    for l in lengths {
        let acc = accuracy_at_length(predictor, vocab, task, l, testset_seed, n)?;
        points.push((l, acc, n));
    }
    Ok(AccuracyCurve {
        task,
        iter: 0,
        points,
    })
}

/// How accuracy shortfalls are aggregated into the gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapMode {
    /// Mean of clamp(aux - main, 0, 1); transfer beyond the auxiliary
    /// ceiling counts as complete.
    #[default]
    Clamped,
    /// Mean of |aux - main|.
    Absolute,
}

/// Mean accuracy shortfall of the main task relative to the auxiliary task
/// across the evaluation lengths; 0 means the main curve matches or exceeds
/// the auxiliary everywhere.
pub fn generalization_gap(
    main: &AccuracyCurve,
    aux: &AccuracyCurve,
    lengths: &[u32],
    mode: GapMode,
) -> Result<f64, EvalError> {
    let mut sum = 0.0;
    for &l in lengths {
        let m = main.accuracy_at(l).ok_or(EvalError::MissingLength(l))?;
        let a = aux.accuracy_at(l).ok_or(EvalError::MissingLength(l))?;
        sum += match mode {
            GapMode::Clamped => (a - m).clamp(0.0, 1.0),
            GapMode::Absolute => (a - m).abs(),
        };
    }
    Ok(sum / lengths.len() as f64)
}

/// Default gap evaluation lengths: 1 ..= max auxiliary train length + 4.
pub fn default_gap_lengths(group: &TaskGroup) -> Vec<u32> {
    let hi = group
        .max_aux_length()
        .or_else(|| group.members.iter().map(|m| m.max_length).max())
        .unwrap_or(1);
    (1..=hi + 4).collect()
}

/// Pearson correlation; None below two points or under zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / crate::numeric::f64x::sqrt(sxx * syy))
}

/// Counts exact input-token collisions between the first `n_train` examples
/// of the training stream and a testset slice. Expected to be zero in any
/// healthy configuration.
pub fn collision_count(
    group: &TaskGroup,
    vocab: &Vocab,
    data_seed: u64,
    n_train: u64,
    task: TaskId,
    length: u32,
    testset_seed: u64,
    n_test: usize,
) -> Result<usize, EvalError> {
    use alloc::collections::BTreeSet;
    let mut train_inputs: BTreeSet<Vec<u32>> = BTreeSet::new();
    for i in 0..n_train {
        let mut rng = crate::rng::train_example_rng(data_seed, i);
        let s = crate::sampler::sample_training_example(group, vocab, &mut rng)?;
        train_inputs.insert(s.input);
    }
    let mut hits = 0;
    for j in 0..n_test {
        let s = test_sample(vocab, task, length, testset_seed, j as u64)?;
        if train_inputs.contains(&s.input) {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Scores every masked position with uniformly random tokens (evaluation
/// pipeline noise floor).
pub struct RandomStub {
    pub vocab_size: u32,
    pub seed: u64,
}

impl Predictor for RandomStub {
    fn predict_masked(&self, tokens: &[u32], mask: &[u8]) -> Result<Vec<u32>, ModelError> {
        let mut rng = crate::rng::train_example_rng(self.seed, tokens.len() as u64);
        Ok((1..tokens.len())
            .filter(|&t| mask[t] == 1)
            .map(|_| rng.random_range(0..self.vocab_size))
            .collect())
    }
}

/// Echoes the forced target at every masked position (oracle substitution).
pub struct PerfectStub;

impl Predictor for PerfectStub {
    fn predict_masked(&self, tokens: &[u32], mask: &[u8]) -> Result<Vec<u32>, ModelError> {
        Ok((1..tokens.len())
            .filter(|&t| mask[t] == 1)
            .map(|t| tokens[t])
            .collect())
    }
}
