//! Arithmetic-format tasks over reversed digit strings.
//!
//! All operands and answers are written least-significant digit first. The
//! fixed-width outputs (max operand digits + 1) come from the worked
//! examples: 8-digit operands always produce 9-character answers, with `0`
//! padding appended on the most-significant end.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Instance, TaskError};
use crate::corpus::TaskId;

/// Digits of a reversed decimal string, index 0 = ones place.
fn digits(s: &str) -> Vec<u8> {
    s.bytes().map(|b| b - b'0').collect()
}

fn render(digits: &[u8]) -> String {
    digits.iter().map(|d| (d + b'0') as char).collect()
}

/// Drops most-significant zeros (the trailing entries), keeping at least one
/// digit.
fn trim(mut d: Vec<u8>) -> Vec<u8> {
    while d.len() > 1 && *d.last().unwrap() == 0 {
        d.pop();
    }
    d
}

fn pad_to(mut d: Vec<u8>, width: usize) -> Vec<u8> {
    while d.len() < width {
        d.push(0);
    }
    d
}

/// Grade-school sum of two reversed digit vectors, trimmed.
fn add_digits(a: &[u8], b: &[u8]) -> Vec<u8> {
    let n = a.len().max(b.len());
    let mut out = Vec::with_capacity(n + 1);
    let mut carry = 0u8;
    for i in 0..n {
        let s = a.get(i).copied().unwrap_or(0) + b.get(i).copied().unwrap_or(0) + carry;
        out.push(s % 10);
        carry = s / 10;
    }
    if carry > 0 {
        out.push(carry);
    }
    trim(out)
}

/// a - b, requires value(a) >= value(b).
fn sub_digits(a: &[u8], b: &[u8]) -> Result<Vec<u8>, TaskError> {
    let n = a.len().max(b.len());
    let mut out = Vec::with_capacity(n);
    let mut borrow = 0i8;
    for i in 0..n {
        let mut d = a.get(i).copied().unwrap_or(0) as i8
            - b.get(i).copied().unwrap_or(0) as i8
            - borrow;
        if d < 0 {
            d += 10;
            borrow = 1;
        } else {
            borrow = 0;
        }
        out.push(d as u8);
    }
    if borrow != 0 {
        return Err(TaskError::NegativeResult);
    }
    Ok(trim(out))
}

/// a * m for a single digit m, shifted by `shift` decimal places.
fn mul_digit(a: &[u8], m: u8, shift: usize) -> Vec<u8> {
    let mut out = vec![0u8; shift];
    let mut carry = 0u8;
    for &d in a {
        let p = d * m + carry;
        out.push(p % 10);
        carry = p / 10;
    }
    if carry > 0 {
        out.push(carry);
    }
    trim(out)
}

/// Reversed sum of `a + b`, width max(|a|,|b|)+1.
pub fn solve_reverse_add(a: &str, b: &str) -> String {
    let width = a.len().max(b.len()) + 1;
    render(&pad_to(add_digits(&digits(a), &digits(b)), width))
}

/// Digit-wise sums mod 10 with no carry propagation, width max+1.
pub fn solve_no_carry(a: &str, b: &str) -> String {
    let (da, db) = (digits(a), digits(b));
    let n = da.len().max(db.len());
    let mut out: Vec<u8> = (0..n)
        .map(|i| (da.get(i).copied().unwrap_or(0) + db.get(i).copied().unwrap_or(0)) % 10)
        .collect();
    out.push(0);
    render(&out)
}

/// Binary mask of positions that receive an incoming carry during the
/// grade-school addition of a + b (position 0 never does), width max+1.
pub fn solve_carry_only(a: &str, b: &str) -> String {
    let (da, db) = (digits(a), digits(b));
    let n = da.len().max(db.len());
    let mut out = Vec::with_capacity(n + 1);
    let mut carry = 0u8;
    for i in 0..=n {
        out.push(carry);
        let s = da.get(i).copied().unwrap_or(0) + db.get(i).copied().unwrap_or(0) + carry;
        carry = s / 10;
    }
    render(&out)
}

/// Reversed difference a - b (value(a) >= value(b)), width max+1.
pub fn solve_reverse_subtract(a: &str, b: &str) -> Result<String, TaskError> {
    let width = a.len().max(b.len()) + 1;
    let d = sub_digits(&digits(a), &digits(b))?;
    Ok(render(&pad_to(d, width)))
}

/// Chain-of-thought multiplication by a 3-digit multiplier.
///
/// With n = |a| and partial products Pk = a * b[k] * 10^k, the target is
/// `P0+P1= S1+P2= F`: each Pk is rendered reversed at width n+1+k, the
/// running sum S1 = P0+P1 and the final product F at their exact digit
/// widths, with a single space after each `=`.
pub fn solve_cot_multiply(a: &str, b: &str) -> Result<String, TaskError> {
    if b.len() != 3 {
        return Err(TaskError::BadMultiplierWidth(b.len()));
    }
    let da = digits(a);
    let db = digits(b);
    let n = a.len();

    let partials: Vec<Vec<u8>> = (0..3).map(|k| mul_digit(&da, db[k], k)).collect();
    let s1 = add_digits(&partials[0], &partials[1]);
    let f = add_digits(&s1, &partials[2]);

    Ok(format!(
        "{}+{}= {}+{}= {}",
        render(&pad_to(partials[0].clone(), n + 1)),
        render(&pad_to(partials[1].clone(), n + 2)),
        render(&s1),
        render(&pad_to(partials[2].clone(), n + 3)),
        render(&f),
    ))
}

/// Control task: addition format, answer is the first operand unchanged.
pub fn solve_copy_first_op(a: &str, _b: &str) -> String {
    a.into()
}

/// Reversed digit string with exactly `len` digits and nonzero value
/// (most-significant digit nonzero).
fn random_operand(len: usize, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::with_capacity(len);
    for i in 0..len {
        let lo = if i + 1 == len { 1 } else { 0 };
        out.push((b'0' + rng.random_range(lo..=9u8)) as char);
    }
    out
}

/// Uniform digit counts in [1, length] conditioned on max = length: one
/// operand pinned at `length` digits (fair coin for which), the other
/// uniform in [1, length].
fn operand_pair(length: u32, rng: &mut ChaCha8Rng) -> (String, String) {
    let other = rng.random_range(1..=length) as usize;
    if rng.random_range(0..2u8) == 0 {
        (random_operand(length as usize, rng), random_operand(other, rng))
    } else {
        (random_operand(other, rng), random_operand(length as usize, rng))
    }
}

/// value(a) >= value(b) for reversed digit strings.
fn value_geq(a: &str, b: &str) -> bool {
    let (da, db) = (trim(digits(a)), trim(digits(b)));
    if da.len() != db.len() {
        return da.len() > db.len();
    }
    for i in (0..da.len()).rev() {
        if da[i] != db[i] {
            return da[i] > db[i];
        }
    }
    true
}

/// Draws an arithmetic instance. For reverse subtract the operands are
/// swapped so value(a) >= value(b); CoT multiply pins |a| = length, |b| = 3.
pub fn sample_arith_instance(
    task: TaskId,
    length: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Instance, TaskError> {
    if length < 1 {
        return Err(TaskError::BadLength { task, length });
    }
    let (a, b, op, target) = match task {
        TaskId::ReverseAdd => {
            let (a, b) = operand_pair(length, rng);
            let t = solve_reverse_add(&a, &b);
            (a, b, '+', t)
        }
        TaskId::NoCarry => {
            let (a, b) = operand_pair(length, rng);
            let t = solve_no_carry(&a, &b);
            (a, b, '+', t)
        }
        TaskId::CarryOnly => {
            let (a, b) = operand_pair(length, rng);
            let t = solve_carry_only(&a, &b);
            (a, b, '+', t)
        }
        TaskId::ReverseSubtract => {
            let (x, y) = operand_pair(length, rng);
            let (a, b) = if value_geq(&x, &y) { (x, y) } else { (y, x) };
            let t = solve_reverse_subtract(&a, &b)?;
            (a, b, '-', t)
        }
        TaskId::CotMultiply => {
            let a = random_operand(length as usize, rng);
            let b = random_operand(3, rng);
            let t = solve_cot_multiply(&a, &b)?;
            (a, b, '*', t)
        }
        TaskId::CopyFirstOp => {
            let (a, b) = operand_pair(length, rng);
            let t = solve_copy_first_op(&a, &b);
            (a, b, '+', t)
        }
        _ => unreachable!("not an arithmetic task"),
    };
    Ok(Instance {
        task,
        length,
        input: format!("{a}{op}{b}="),
        target,
    })
}
