//! Task instance generators and pure solvers.
//!
//! Each task is driven by a single length parameter: max operand digits for
//! arithmetic, character count for strings, node count for mazes. Instances
//! are plain strings; [`encode_instance`] turns them into token samples.

pub mod arith;
pub mod maze;
pub mod strings;

use alloc::string::String;
use core::fmt;

use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusError, Sample, TaskId, Vocab, BOS, EOS};

/// One concrete problem instance in text form. The prompt ends with the
/// task's terminator (`=` for arithmetic/strings, `?` for mazes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub task: TaskId,
    pub length: u32,
    pub input: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskError {
    /// Subtraction sampler produced value(a) < value(b); signals a bug.
    NegativeResult,
    /// CoT multiply requires a 3-digit multiplier.
    BadMultiplierWidth(usize),
    /// No unambiguous MQAR instance found within the retry budget.
    Unsatisfiable,
    /// Length parameter outside the task's valid range.
    BadLength { task: TaskId, length: u32 },
    Corpus(CorpusError),
}

impl fmt::Display for TaskError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskError::NegativeResult => write!(f, "subtraction operands out of order"),
            TaskError::BadMultiplierWidth(w) => write!(f, "multiplier has {w} digits, need 3"),
            TaskError::Unsatisfiable => write!(f, "no unambiguous instance within retry budget"),
            TaskError::BadLength { task, length } => {
                write!(f, "length {length} invalid for task {task}")
            }
            TaskError::Corpus(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TaskError {}

impl From<CorpusError> for TaskError {
    fn from(e: CorpusError) -> Self {
        TaskError::Corpus(e)
    }
}

/// Draws one instance of `task` at the given length parameter.
pub fn sample_instance(task: TaskId, length: u32, rng: &mut ChaCha8Rng) -> Result<Instance, TaskError> {
    match task {
        TaskId::ReverseAdd
        | TaskId::NoCarry
        | TaskId::CarryOnly
        | TaskId::ReverseSubtract
        | TaskId::CotMultiply
        | TaskId::CopyFirstOp => arith::sample_arith_instance(task, length, rng),
        TaskId::StringCopy
        | TaskId::StringReverse
        | TaskId::Capitalize
        | TaskId::CapitalizeReverse
        | TaskId::Mqar => strings::sample_string_instance(task, length, rng),
        TaskId::ShortestPath | TaskId::DfsTrace => maze::sample_maze_instance(task, length, rng),
    }
}

/// Encodes an instance: BOS + prompt tokens as input, answer tokens + EOS as
/// target.
pub fn encode_instance(vocab: &Vocab, inst: &Instance) -> Result<Sample, TaskError> {
    let mut input = alloc::vec![BOS];
    input.extend(vocab.encode(&inst.input)?);
    let mut target = vocab.encode(&inst.target)?;
    target.push(EOS);
    Ok(Sample {
        input,
        target,
        task: inst.task,
        length: inst.length,
    })
}
