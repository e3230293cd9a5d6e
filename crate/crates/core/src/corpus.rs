//! Shared token vocabulary, task-instance encoding and loss-mask
//! construction.
//!
//! Token ids are assigned in a fixed documented order so checkpoints stay
//! portable across machines: specials (pad, bos, eos), digits `0-9`,
//! lowercase `a-z`, uppercase `A-Z`, the symbols `+ - * = ; ? > : ,` and
//! space, then the 64 grid-node tokens `[0]`..`[63]`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;

/// Number of grid-node tokens (one per cell of the 8x8 grid).
pub const NUM_NODE_TOKENS: usize = 64;

const SYMBOLS: &[char] = &['+', '-', '*', '=', ';', '?', '>', ':', ',', ' '];

/// Every task the corpus knows how to encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskId {
    ReverseAdd,
    NoCarry,
    CarryOnly,
    ReverseSubtract,
    CotMultiply,
    CopyFirstOp,
    StringCopy,
    StringReverse,
    Capitalize,
    CapitalizeReverse,
    Mqar,
    ShortestPath,
    DfsTrace,
}

impl TaskId {
    pub const ALL: [TaskId; 13] = [
        TaskId::ReverseAdd,
        TaskId::NoCarry,
        TaskId::CarryOnly,
        TaskId::ReverseSubtract,
        TaskId::CotMultiply,
        TaskId::CopyFirstOp,
        TaskId::StringCopy,
        TaskId::StringReverse,
        TaskId::Capitalize,
        TaskId::CapitalizeReverse,
        TaskId::Mqar,
        TaskId::ShortestPath,
        TaskId::DfsTrace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::ReverseAdd => "reverse_add",
            TaskId::NoCarry => "no_carry",
            TaskId::CarryOnly => "carry_only",
            TaskId::ReverseSubtract => "reverse_subtract",
            TaskId::CotMultiply => "cot_multiply",
            TaskId::CopyFirstOp => "copy_first_op",
            TaskId::StringCopy => "string_copy",
            TaskId::StringReverse => "string_reverse",
            TaskId::Capitalize => "capitalize",
            TaskId::CapitalizeReverse => "capitalize_reverse",
            TaskId::Mqar => "mqar",
            TaskId::ShortestPath => "shortest_path",
            TaskId::DfsTrace => "dfs_trace",
        }
    }

    pub fn from_name(name: &str) -> Option<TaskId> {
        TaskId::ALL.iter().copied().find(|t| t.name() == name)
    }

    /// Stable small integer used to address per-task RNG streams.
    pub fn tag(self) -> u64 {
        TaskId::ALL.iter().position(|t| *t == self).unwrap() as u64
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusError {
    /// Input text contains a substring that is not a vocabulary token.
    UnknownToken { at: usize },
    /// A token id outside the vocabulary.
    InvalidId(u32),
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::UnknownToken { at } => write!(f, "unknown token at byte {at}"),
            CorpusError::InvalidId(id) => write!(f, "invalid token id {id}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CorpusError {}

/// Immutable token vocabulary. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: BTreeMap<String, u32>,
}

/// Builds the fixed experiment vocabulary: 3 specials, 10 digits, 26 + 26
/// letters, 10 symbols and 64 node tokens (139 total).
pub fn build_vocab() -> Vocab {
    let mut tokens: Vec<String> = vec!["<pad>".into(), "<bos>".into(), "<eos>".into()];
    tokens.extend(('0'..='9').map(String::from));
    tokens.extend(('a'..='z').map(String::from));
    tokens.extend(('A'..='Z').map(String::from));
    tokens.extend(SYMBOLS.iter().copied().map(String::from));
    tokens.extend((0..NUM_NODE_TOKENS).map(|k| alloc::format!("[{k}]")));

    let ids = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    Vocab { tokens, ids }
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lookup(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Result<&str, CorpusError> {
        self.tokens
            .get(id as usize)
            .map(String::as_str)
            .ok_or(CorpusError::InvalidId(id))
    }

    pub fn node_token_id(&self, label: u16) -> u32 {
        debug_assert!((label as usize) < NUM_NODE_TOKENS);
        (self.tokens.len() - NUM_NODE_TOKENS) as u32 + label as u32
    }

    /// Greedy tokenization. Node tokens `[k]` are matched as whole bracketed
    /// units; everything else is a single character. A `[` that does not
    /// open a valid node token is an error (no task format produces one).
    pub fn encode(&self, text: &str) -> Result<Vec<u32>, CorpusError> {
        let bytes = text.as_bytes();
        let mut out = Vec::with_capacity(bytes.len());
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] == b'[' {
                let close = bytes[i..]
                    .iter()
                    .position(|&b| b == b']')
                    .ok_or(CorpusError::UnknownToken { at: i })?;
                let tok = &text[i..i + close + 1];
                let id = self
                    .lookup(tok)
                    .ok_or(CorpusError::UnknownToken { at: i })?;
                out.push(id);
                i += close + 1;
            } else {
                let ch = text[i..].chars().next().unwrap();
                let mut buf = [0u8; 4];
                let id = self
                    .lookup(ch.encode_utf8(&mut buf))
                    .ok_or(CorpusError::UnknownToken { at: i })?;
                out.push(id);
                i += ch.len_utf8();
            }
        }
        Ok(out)
    }

    /// Inverse of [`Vocab::encode`]; specials render as empty strings.
    pub fn decode(&self, ids: &[u32]) -> Result<String, CorpusError> {
        let mut out = String::new();
        for &id in ids {
            let tok = self.token(id)?;
            if id != PAD && id != BOS && id != EOS {
                out.push_str(tok);
            }
        }
        Ok(out)
    }

    /// One token per line, line number = id. Inverse of [`parse_vocab_dump`].
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }
}

/// Reloads a `vocab.txt` dump; ids are the zero-based line numbers.
pub fn parse_vocab_dump(text: &str) -> Vocab {
    let tokens: Vec<String> = text.split('\n').map(String::from).collect();
    // A trailing newline yields one empty trailing entry; drop it.
    let tokens: Vec<String> = if tokens.last().is_some_and(String::is_empty) {
        tokens[..tokens.len() - 1].to_vec()
    } else {
        tokens
    };
    let ids = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    Vocab { tokens, ids }
}

/// One training / evaluation example. `input` starts with BOS and ends at
/// the task's prompt terminator (`=` or `?`); `target` ends with EOS. The
/// model trains on the concatenation `input ‖ target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub input: Vec<u32>,
    pub target: Vec<u32>,
    pub task: TaskId,
    pub length: u32,
}

impl Sample {
    pub fn total_len(&self) -> usize {
        self.input.len() + self.target.len()
    }
}

/// Loss mask over `input ‖ target`: zero on every input position, one on
/// target positions. MQAR is the exception: only the answer characters (the
/// token immediately before each `;` separator) carry loss — query echoes,
/// separators, and EOS are context only.
pub fn make_loss_mask(vocab: &Vocab, sample: &Sample) -> Vec<u8> {
    let mut mask = vec![0u8; sample.total_len()];
    let off = sample.input.len();
    if sample.task == TaskId::Mqar {
        let sep = vocab.lookup(";").expect("separator in vocab");
        for i in 0..sample.target.len().saturating_sub(1) {
            if sample.target[i + 1] == sep {
                mask[off + i] = 1;
            }
        }
    } else {
        for m in mask[off..].iter_mut() {
            *m = 1;
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn vocab_has_139_tokens_in_documented_order() {
        let v = build_vocab();
        assert_eq!(v.len(), 139);
        assert_eq!(v.lookup("<pad>"), Some(PAD));
        assert_eq!(v.lookup("<bos>"), Some(BOS));
        assert_eq!(v.lookup("<eos>"), Some(EOS));
        assert_eq!(v.lookup("0"), Some(3));
        assert_eq!(v.lookup("a"), Some(13));
        assert_eq!(v.lookup("A"), Some(39));
        assert_eq!(v.lookup("+"), Some(65));
        assert_eq!(v.lookup(" "), Some(74));
        assert_eq!(v.lookup("[0]"), Some(75));
        assert_eq!(v.lookup("[63]"), Some(138));
    }

    #[test]
    fn lookup_decode_round_trip_all_ids() {
        let v = build_vocab();
        for id in 0..v.len() as u32 {
            assert_eq!(v.lookup(v.token(id).unwrap()), Some(id));
        }
    }

    #[test]
    fn encode_examples() {
        let v = build_vocab();
        assert_eq!(v.encode("1+2=").unwrap().len(), 4);
        let ids = v.encode("[12]>[2]").unwrap();
        assert_eq!(ids.len(), 3);
        assert_eq!(ids[0], v.node_token_id(12));
        assert_eq!(ids[2], v.node_token_id(2));
        assert_eq!(v.decode(&v.encode("+").unwrap()).unwrap(), "+");
    }

    #[test]
    fn encode_rejects_unknown_and_bad_brackets() {
        let v = build_vocab();
        assert!(matches!(
            v.encode("a#b"),
            Err(CorpusError::UnknownToken { at: 1 })
        ));
        assert!(v.encode("[64]").is_err());
        assert!(v.encode("[").is_err());
        assert!(v.encode("[xy]").is_err());
    }

    #[test]
    fn encode_decode_round_trip_random_id_sequences() {
        let v = build_vocab();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let text_ids: Vec<u32> = (3..v.len() as u32).collect(); // skip specials
        for _ in 0..1000 {
            let n = rng.random_range(1..40);
            let ids: Vec<u32> = (0..n)
                .map(|_| text_ids[rng.random_range(0..text_ids.len())])
                .collect();
            let text = v.decode(&ids).unwrap();
            assert_eq!(v.encode(&text).unwrap(), ids);
        }
    }

    #[test]
    fn vocab_dump_round_trip_preserves_ids() {
        let v = build_vocab();
        let reloaded = parse_vocab_dump(&v.dump());
        assert_eq!(reloaded.len(), v.len());
        for id in 0..v.len() as u32 {
            assert_eq!(reloaded.lookup(v.token(id).unwrap()), Some(id));
        }
    }

    #[test]
    fn loss_mask_plain_task() {
        let v = build_vocab();
        let sample = Sample {
            input: vec![BOS; 18],
            target: vec![EOS; 9],
            task: TaskId::ReverseAdd,
            length: 8,
        };
        let mask = make_loss_mask(&v, &sample);
        assert_eq!(&mask[..18], &[0; 18]);
        assert_eq!(&mask[18..], &[1; 9]);
    }

    #[test]
    fn loss_mask_mqar_answers_only() {
        let v = build_vocab();
        let target: Vec<u32> = v
            .encode("fVOB;OBA1;")
            .unwrap()
            .into_iter()
            .chain([EOS])
            .collect();
        let sample = Sample {
            input: v.encode("fVOBA1fR=").unwrap(),
            target,
            task: TaskId::Mqar,
            length: 8,
        };
        let mask = make_loss_mask(&v, &sample);
        let off = sample.input.len();
        // ones exactly at 'B' (index 3) and '1' (index 8) of the target
        let expect = [0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0];
        assert_eq!(&mask[off..], &expect);
        assert!(mask[..off].iter().all(|&m| m == 0));
    }

    #[test]
    fn loss_mask_empty_target_is_all_input_zeros() {
        let v = build_vocab();
        let sample = Sample {
            input: vec![BOS, 3],
            target: vec![],
            task: TaskId::Mqar,
            length: 1,
        };
        assert_eq!(make_loss_mask(&v, &sample), vec![0, 0]);
    }
}
