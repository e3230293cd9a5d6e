//! String-transformation tasks over the 62-symbol alphanumeric alphabet.
//!
//! Length = character count of the input string. MQAR targets echo each
//! query substring, then the character following its unique occurrence,
//! then `;`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Instance, TaskError};
use crate::corpus::TaskId;

const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// MQAR sampling knobs. Defaults follow the worked example: width-3 queries,
/// one query per four characters of input.
#[derive(Debug, Clone, Copy)]
pub struct MqarParams {
    pub query_width: u32,
    /// Upper bound on resample attempts before giving up.
    pub max_retries: u32,
}

impl Default for MqarParams {
    fn default() -> Self {
        MqarParams {
            query_width: 3,
            max_retries: 200,
        }
    }
}

impl MqarParams {
    pub fn num_queries(&self, length: u32) -> u32 {
        (length / 4).max(1)
    }
}

pub fn solve_copy(s: &str) -> String {
    s.into()
}

pub fn solve_reverse(s: &str) -> String {
    s.chars().rev().collect()
}

pub fn solve_capitalize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_lowercase() {
                c.to_ascii_uppercase()
            } else if c.is_ascii_uppercase() {
                c.to_ascii_lowercase()
            } else {
                c
            }
        })
        .collect()
}

pub fn solve_capitalize_reverse(s: &str) -> String {
    solve_capitalize(&solve_reverse(s))
}

fn random_string(length: usize, rng: &mut ChaCha8Rng) -> String {
    (0..length)
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
        .collect()
}

fn count_occurrences(hay: &str, needle: &str) -> usize {
    if needle.is_empty() {
        return 0;
    }
    (0..=hay.len().saturating_sub(needle.len()))
        .filter(|&i| &hay[i..i + needle.len()] == needle)
        .count()
}

/// MQAR target text for queries at the given start positions: each query's
/// characters, then the character following it, then `;`.
pub fn mqar_target(s: &str, positions: &[usize], width: usize) -> String {
    let mut target = String::new();
    for &p in positions {
        target.push_str(&s[p..p + width]);
        target.push_str(&s[p + width..p + width + 1]);
        target.push(';');
    }
    target
}

/// An MQAR instance: query positions drawn without replacement, each query
/// substring required to occur exactly once in `s` (positions, then the
/// whole string, are resampled until that holds).
pub fn gen_mqar_instance(
    length: u32,
    num_queries: u32,
    query_width: u32,
    rng: &mut ChaCha8Rng,
    max_retries: u32,
) -> Result<Instance, TaskError> {
    // Queries need a following answer character, so width is capped at
    // length-1 (and the length floor is 2).
    let length = length.max(2);
    let w = query_width.clamp(1, length - 1) as usize;
    let n = length as usize;
    let positions_avail = n - w; // valid starts: 0 ..= n-w-1
    let nq = (num_queries as usize).clamp(1, positions_avail);

    for _ in 0..max_retries {
        let s = random_string(n, rng);
        let mut positions: Vec<usize> = (0..positions_avail).collect();
        positions.shuffle(rng);
        positions.truncate(nq);
        positions.sort_unstable();

        if positions
            .iter()
            .all(|&p| count_occurrences(&s, &s[p..p + w]) == 1)
        {
            let target = mqar_target(&s, &positions, w);
            return Ok(Instance {
                task: TaskId::Mqar,
                length,
                input: format!("{s}="),
                target,
            });
        }
    }
    Err(TaskError::Unsatisfiable)
}

pub fn sample_string_instance(
    task: TaskId,
    length: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Instance, TaskError> {
    if length < 1 {
        return Err(TaskError::BadLength { task, length });
    }
    if task == TaskId::Mqar {
        let p = MqarParams::default();
        return gen_mqar_instance(length, p.num_queries(length), p.query_width, rng, p.max_retries);
    }
    let s = random_string(length as usize, rng);
    let target = match task {
        TaskId::StringCopy => solve_copy(&s),
        TaskId::StringReverse => solve_reverse(&s),
        TaskId::Capitalize => solve_capitalize(&s),
        TaskId::CapitalizeReverse => solve_capitalize_reverse(&s),
        _ => unreachable!("not a string task"),
    };
    Ok(Instance {
        task,
        length,
        input: format!("{s}="),
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    const S: &str = "fVOBA1fR";

    #[test]
    fn worked_examples_reproduce() {
        assert_eq!(solve_copy(S), "fVOBA1fR");
        assert_eq!(solve_reverse(S), "Rf1ABOVf");
        assert_eq!(solve_capitalize(S), "Fvoba1Fr");
        assert_eq!(solve_capitalize_reverse(S), "rF1abovF");
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(solve_copy(""), "");
        assert_eq!(solve_reverse("a"), "a");
        assert_eq!(solve_capitalize("123"), "123");
        assert_eq!(solve_capitalize_reverse("A"), "a");
    }

    #[test]
    fn involutions_and_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let s = random_string(rng.random_range(1..40), &mut rng);
            assert_eq!(solve_reverse(&solve_reverse(&s)), s);
            assert_eq!(solve_capitalize(&solve_capitalize(&s)), s);
            assert_eq!(
                solve_capitalize_reverse(&s),
                solve_capitalize(&solve_reverse(&s))
            );
            assert_eq!(solve_copy(&solve_copy(&s)), s);
        }
    }

    #[test]
    fn mqar_worked_example_target_shape() {
        // queries at positions 0 and 2: query echo, answer char, separator
        assert_eq!(mqar_target(S, &[0, 2], 3), "fVOB;OBA1;");
    }

    #[test]
    fn mqar_single_window_case() {
        // length 4, width 3: the only valid start is 0.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = gen_mqar_instance(4, 1, 3, &mut rng, 200).unwrap();
        let s = inst.input.strip_suffix('=').unwrap();
        assert_eq!(inst.target, format!("{}{};", &s[0..3], &s[3..4]));
    }

    #[test]
    fn mqar_queries_occur_exactly_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            let len = rng.random_range(2..24);
            let inst = sample_string_instance(TaskId::Mqar, len, &mut rng).unwrap();
            let s = inst.input.strip_suffix('=').unwrap();
            let w = (3u32.min(len - 1)) as usize;
            for chunk in inst.target.split(';').filter(|c| !c.is_empty()) {
                assert_eq!(chunk.len(), w + 1);
                let (q, ans) = chunk.split_at(w);
                assert_eq!(count_occurrences(s, q), 1, "query {q} in {s}");
                let pos = s.find(q).unwrap();
                assert_eq!(&s[pos + w..pos + w + 1], ans);
            }
        }
    }

    #[test]
    fn mqar_query_count_follows_default() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = sample_string_instance(TaskId::Mqar, 16, &mut rng).unwrap();
        assert_eq!(inst.target.matches(';').count(), 4);
    }

    #[test]
    fn solvers_are_length_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for task in [
            TaskId::StringCopy,
            TaskId::StringReverse,
            TaskId::Capitalize,
            TaskId::CapitalizeReverse,
        ] {
            let inst = sample_string_instance(task, 17, &mut rng).unwrap();
            assert_eq!(inst.target.len(), 17);
            assert_eq!(inst.input.len(), 18);
        }
    }
}
