//! Multi-task training-data protocol: uniform task choice over a group,
//! uniform length choice per member, on-the-fly instance construction and
//! padded batching.
//!
//! The data stream is a pure function of (group config, data seed): example
//! `i` is generated from its own counter-indexed RNG stream, so replaying a
//! seed reproduces identical batches byte-for-byte at any offset and under
//! any parallel schedule.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{make_loss_mask, Sample, TaskId, Vocab};
use crate::rng::train_example_rng;
use crate::tasks::{encode_instance, sample_instance, TaskError};

/// Role of a group member, used by evaluation to pick regime boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Main,
    Auxiliary,
    Control,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Main => "main",
            Role::Auxiliary => "auxiliary",
            Role::Control => "control",
        }
    }

    pub fn from_name(s: &str) -> Option<Role> {
        match s {
            "main" => Some(Role::Main),
            "auxiliary" => Some(Role::Auxiliary),
            "control" => Some(Role::Control),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupMember {
    pub task: TaskId,
    pub min_length: u32,
    pub max_length: u32,
    pub role: Role,
}

/// Whether the task draw happens per example or once per batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TaskDraw {
    #[default]
    PerExample,
    PerBatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskGroup {
    pub members: Vec<GroupMember>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupError {
    Empty,
    EmptyRange { task: TaskId },
}

impl fmt::Display for GroupError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupError::Empty => write!(f, "task group has no members"),
            GroupError::EmptyRange { task } => write!(f, "empty length range for {task}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GroupError {}

impl TaskGroup {
    pub fn new(members: Vec<GroupMember>) -> Result<TaskGroup, GroupError> {
        if members.is_empty() {
            return Err(GroupError::Empty);
        }
        for m in &members {
            if m.min_length > m.max_length || m.min_length == 0 {
                return Err(GroupError::EmptyRange { task: m.task });
            }
        }
        Ok(TaskGroup { members })
    }

    pub fn main(&self) -> Option<&GroupMember> {
        self.members.iter().find(|m| m.role == Role::Main)
    }

    pub fn max_aux_length(&self) -> Option<u32> {
        self.members
            .iter()
            .filter(|m| m.role == Role::Auxiliary)
            .map(|m| m.max_length)
            .max()
    }
}

/// Draws one training example: task uniform over members, length uniform in
/// the member's range, instance from the task sampler, tokens from the
/// vocabulary.
pub fn sample_training_example(
    group: &TaskGroup,
    vocab: &Vocab,
    rng: &mut ChaCha8Rng,
) -> Result<Sample, TaskError> {
    let member = group.members[rng.random_range(0..group.members.len())];
    sample_member_example(member, vocab, rng)
}

fn sample_member_example(
    member: GroupMember,
    vocab: &Vocab,
    rng: &mut ChaCha8Rng,
) -> Result<Sample, TaskError> {
    let length = rng.random_range(member.min_length..=member.max_length);
    let inst = sample_instance(member.task, length, rng)?;
    encode_instance(vocab, &inst)
}

/// Token matrix padded with the pad id, plus the matching loss-mask matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub tokens: Vec<u32>,
    pub mask: Vec<u8>,
    pub rows: usize,
    pub width: usize,
    /// True (unpadded) length per row.
    pub lens: Vec<usize>,
    pub meta: Vec<(TaskId, u32)>,
    /// Input length (prompt incl. BOS) per row.
    pub prompt_lens: Vec<usize>,
}

impl Batch {
    pub fn row_tokens(&self, r: usize) -> &[u32] {
        &self.tokens[r * self.width..r * self.width + self.lens[r]]
    }

    pub fn row_mask(&self, r: usize) -> &[u8] {
        &self.mask[r * self.width..r * self.width + self.lens[r]]
    }
}

/// Right-pads samples into a matrix; masks are zero on padding; row order is
/// input order.
pub fn make_batch(vocab: &Vocab, samples: &[Sample], pad_id: u32) -> Batch {
    assert!(!samples.is_empty(), "empty batch");
    let width = samples.iter().map(Sample::total_len).max().unwrap();
    make_batch_with_width(vocab, samples, pad_id, width)
}

/// [`make_batch`] padded out to an explicit width (for comparing batches of
/// different tasks at equal shape).
pub fn make_batch_with_width(
    vocab: &Vocab,
    samples: &[Sample],
    pad_id: u32,
    width: usize,
) -> Batch {
    assert!(!samples.is_empty(), "empty batch");
    assert!(samples.iter().all(|s| s.total_len() <= width), "width too small");
    let rows = samples.len();
    let mut tokens = vec![pad_id; rows * width];
    let mut mask = vec![0u8; rows * width];
    let mut lens = Vec::with_capacity(rows);
    let mut meta = Vec::with_capacity(rows);
    let mut prompt_lens = Vec::with_capacity(rows);
    for (r, s) in samples.iter().enumerate() {
        let row = &mut tokens[r * width..(r + 1) * width];
        row[..s.input.len()].copy_from_slice(&s.input);
        row[s.input.len()..s.total_len()].copy_from_slice(&s.target);
        mask[r * width..r * width + s.total_len()].copy_from_slice(&make_loss_mask(vocab, s));
        lens.push(s.total_len());
        meta.push((s.task, s.length));
        prompt_lens.push(s.input.len());
    }
    Batch {
        tokens,
        mask,
        rows,
        width,
        lens,
        meta,
        prompt_lens,
    }
}

/// Training batch `batch_index` of the deterministic stream: examples are
/// addressed by global counter, so any batch can be regenerated in
/// isolation.
pub fn training_batch(
    group: &TaskGroup,
    vocab: &Vocab,
    data_seed: u64,
    batch_index: u64,
    batch_size: usize,
    draw: TaskDraw,
) -> Result<Batch, TaskError> {
    let base = batch_index * batch_size as u64;
    let batch_member = match draw {
        TaskDraw::PerExample => None,
        TaskDraw::PerBatch => {
            let mut rng = train_example_rng(data_seed, u64::MAX ^ batch_index);
            Some(group.members[rng.random_range(0..group.members.len())])
        }
    };
    let mut samples = Vec::with_capacity(batch_size);
    for i in 0..batch_size as u64 {
        let mut rng = train_example_rng(data_seed, base + i);
        let sample = match batch_member {
            Some(member) => sample_member_example(member, vocab, &mut rng)?,
            None => sample_training_example(group, vocab, &mut rng)?,
        };
        samples.push(sample);
    }
    Ok(make_batch(vocab, &samples, crate::corpus::PAD))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use rand_chacha::rand_core::SeedableRng;

    fn member(task: TaskId, lo: u32, hi: u32, role: Role) -> GroupMember {
        GroupMember {
            task,
            min_length: lo,
            max_length: hi,
            role,
        }
    }

    #[test]
    fn group_validation() {
        assert!(matches!(TaskGroup::new(vec![]), Err(GroupError::Empty)));
        assert!(TaskGroup::new(vec![member(TaskId::StringCopy, 5, 4, Role::Main)]).is_err());
        assert!(TaskGroup::new(vec![member(TaskId::StringCopy, 1, 8, Role::Main)]).is_ok());
    }

    #[test]
    fn single_member_group_always_that_task() {
        let vocab = build_vocab();
        let group = TaskGroup::new(vec![member(TaskId::ReverseAdd, 1, 4, Role::Main)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let s = sample_training_example(&group, &vocab, &mut rng).unwrap();
            assert_eq!(s.task, TaskId::ReverseAdd);
        }
    }

    #[test]
    fn two_member_group_is_balanced() {
        let vocab = build_vocab();
        let group = TaskGroup::new(vec![
            member(TaskId::StringCopy, 1, 8, Role::Main),
            member(TaskId::StringReverse, 1, 8, Role::Auxiliary),
        ])
        .unwrap();
        let draws = 100_000;
        let mut copies = 0u32;
        for i in 0..draws {
            let mut rng = train_example_rng(42, i);
            let s = sample_training_example(&group, &vocab, &mut rng).unwrap();
            if s.task == TaskId::StringCopy {
                copies += 1;
            }
        }
        let freq = copies as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn lengths_are_uniform_chi_square() {
        let vocab = build_vocab();
        let group = TaskGroup::new(vec![member(TaskId::StringCopy, 1, 16, Role::Main)]).unwrap();
        let draws = 100_000u64;
        let mut counts = [0f64; 16];
        for i in 0..draws {
            let mut rng = train_example_rng(7, i);
            let s = sample_training_example(&group, &vocab, &mut rng).unwrap();
            counts[(s.length - 1) as usize] += 1.0;
        }
        let expected = draws as f64 / 16.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 15 dof, p > 0.01 means chi2 below 30.58
        assert!(chi2 < 30.58, "chi2 {chi2}");
    }

    #[test]
    fn batch_padding_and_mask_counts() {
        let vocab = build_vocab();
        let s1 = Sample {
            input: vec![1, 3, 4],
            target: vec![5, 2],
            task: TaskId::StringCopy,
            length: 1,
        };
        let s2 = Sample {
            input: vec![1, 3, 4, 5, 6, 7],
            target: vec![8, 9, 2],
            task: TaskId::StringCopy,
            length: 2,
        };
        let b = make_batch(&vocab, &[s1.clone(), s2.clone()], 0);
        assert_eq!(b.width, 9);
        assert_eq!(b.rows, 2);
        assert_eq!(&b.tokens[5..9], &[0, 0, 0, 0]); // row 0 padding
        let mask_total: u32 = b.mask.iter().map(|&m| m as u32).sum();
        assert_eq!(mask_total, (s1.target.len() + s2.target.len()) as u32);
        // single sample keeps exact width
        let b1 = make_batch(&vocab, &[s1], 0);
        assert_eq!(b1.width, 5);
    }

    #[test]
    fn stream_is_replayable_and_offsetable() {
        let vocab = build_vocab();
        let group = TaskGroup::new(vec![
            member(TaskId::ReverseAdd, 1, 6, Role::Main),
            member(TaskId::StringCopy, 1, 8, Role::Auxiliary),
        ])
        .unwrap();
        let a = training_batch(&group, &vocab, 9, 3, 16, TaskDraw::PerExample).unwrap();
        let b = training_batch(&group, &vocab, 9, 3, 16, TaskDraw::PerExample).unwrap();
        assert_eq!(a, b);
        let c = training_batch(&group, &vocab, 9, 4, 16, TaskDraw::PerExample).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn per_batch_draw_uses_one_task() {
        let vocab = build_vocab();
        let group = TaskGroup::new(vec![
            member(TaskId::ReverseAdd, 1, 6, Role::Main),
            member(TaskId::StringCopy, 1, 8, Role::Auxiliary),
        ])
        .unwrap();
        for bi in 0..8 {
            let b = training_batch(&group, &vocab, 11, bi, 8, TaskDraw::PerBatch).unwrap();
            let first = b.meta[0].0;
            assert!(b.meta.iter().all(|&(t, _)| t == first));
        }
    }
}
