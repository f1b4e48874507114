use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::value::{Kind, Provenance, Value, ValueData};
use super::EvalError;

/// Bounds that keep `REPT` and arithmetic from producing huge values.
/// Results beyond either bound are evaluation errors, never truncations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalLimits {
    pub max_string_length: usize,
    pub max_integer_magnitude: i64,
}

impl Default for EvalLimits {
    fn default() -> Self {
        EvalLimits {
            max_string_length: 100,
            max_integer_magnitude: 1_000_000,
        }
    }
}

/// Every operation of the language. Overloads get their own variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Op {
    Concatenate,
    Left,
    Right,
    Mid,
    Replace,
    Trim,
    Rept,
    Substitute,
    SubstituteNth,
    ToText,
    Lower,
    Upper,
    Proper,
    Add,
    Minus,
    Find,
    FindFrom,
    Len,
}

pub const NUM_OPS: usize = 18;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpDescriptor {
    pub op: Op,
    pub name: &'static str,
    pub arg_kinds: &'static [Kind],
    pub return_kind: Kind,
    pub cost: u32,
}

impl OpDescriptor {
    pub fn arity(&self) -> usize {
        self.arg_kinds.len()
    }
}

use Kind::{Int as I, Str as S};

const fn desc(op: Op, name: &'static str, arg_kinds: &'static [Kind], return_kind: Kind) -> OpDescriptor {
    OpDescriptor {
        op,
        name,
        arg_kinds,
        return_kind,
        cost: 1,
    }
}

static OP_TABLE: [OpDescriptor; NUM_OPS] = [
    desc(Op::Concatenate, "CONCATENATE", &[S, S], S),
    desc(Op::Left, "LEFT", &[S, I], S),
    desc(Op::Right, "RIGHT", &[S, I], S),
    desc(Op::Mid, "MID", &[S, I, I], S),
    desc(Op::Replace, "REPLACE", &[S, I, I, S], S),
    desc(Op::Trim, "TRIM", &[S], S),
    desc(Op::Rept, "REPT", &[S, I], S),
    desc(Op::Substitute, "SUBSTITUTE", &[S, S, S], S),
    desc(Op::SubstituteNth, "SUBSTITUTE", &[S, S, S, I], S),
    desc(Op::ToText, "TO_TEXT", &[I], S),
    desc(Op::Lower, "LOWER", &[S], S),
    desc(Op::Upper, "UPPER", &[S], S),
    desc(Op::Proper, "PROPER", &[S], S),
    desc(Op::Add, "ADD", &[I, I], I),
    desc(Op::Minus, "MINUS", &[I, I], I),
    desc(Op::Find, "FIND", &[S, S], I),
    desc(Op::FindFrom, "FIND", &[S, S, I], I),
    desc(Op::Len, "LEN", &[S], I),
];

/// The fixed, ordered operation set. Search visits operations in this order.
pub fn op_table() -> &'static [OpDescriptor] {
    &OP_TABLE
}

impl Op {
    pub const ALL: [Op; NUM_OPS] = [
        Op::Concatenate,
        Op::Left,
        Op::Right,
        Op::Mid,
        Op::Replace,
        Op::Trim,
        Op::Rept,
        Op::Substitute,
        Op::SubstituteNth,
        Op::ToText,
        Op::Lower,
        Op::Upper,
        Op::Proper,
        Op::Add,
        Op::Minus,
        Op::Find,
        Op::FindFrom,
        Op::Len,
    ];

    /// Position in the op table.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn descriptor(self) -> &'static OpDescriptor {
        &OP_TABLE[self.index()]
    }

    pub fn name(self) -> &'static str {
        self.descriptor().name
    }

    pub fn arity(self) -> usize {
        self.descriptor().arity()
    }

    pub fn return_kind(self) -> Kind {
        self.descriptor().return_kind
    }

    /// Resolves a formula function name and argument count to an operation.
    pub fn lookup(name: &str, arity: usize) -> Option<Op> {
        Op::ALL
            .iter()
            .copied()
            .find(|op| op.name().eq_ignore_ascii_case(name) && op.arity() == arity)
    }

    pub fn is_known_name(name: &str) -> bool {
        Op::ALL.iter().any(|op| op.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Applies `op` to already-built arguments, producing a node value with
/// weight `1 + sum(arg weights)`.
pub fn apply_op(op: Op, args: &[Arc<Value>], limits: &EvalLimits) -> Result<Value, EvalError> {
    let data: Vec<&ValueData> = args.iter().map(|a| &a.data).collect();
    let data = apply_rows(op, &data, limits)?;
    let weight = op.descriptor().cost + args.iter().map(|a| a.weight).sum::<u32>();
    Ok(Value {
        data,
        weight,
        provenance: Provenance::Node(op, args.to_vec()),
    })
}

/// Number of characters (Unicode scalar values) in `s`.
#[inline]
pub(crate) fn char_len(s: &str) -> usize {
    if s.is_ascii() {
        s.len()
    } else {
        s.chars().count()
    }
}

/// Byte offset of the `n`th character of `s`, clamped to the end.
#[inline]
fn byte_offset(s: &str, n: usize) -> usize {
    if s.is_ascii() {
        n.min(s.len())
    } else {
        s.char_indices().nth(n).map_or(s.len(), |(b, _)| b)
    }
}

fn proper(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut prev_alpha = false;
    for c in s.chars() {
        if c.is_alphabetic() {
            if prev_alpha {
                out.extend(c.to_lowercase());
            } else {
                out.extend(c.to_uppercase());
            }
            prev_alpha = true;
        } else {
            out.push(c);
            prev_alpha = false;
        }
    }
    out
}

fn substitute_nth(s: &str, from: &str, to: &str, nth: usize) -> String {
    match s.match_indices(from).nth(nth - 1) {
        Some((at, _)) => {
            let mut out = String::with_capacity(s.len() + to.len());
            out.push_str(&s[..at]);
            out.push_str(to);
            out.push_str(&s[at + from.len()..]);
            out
        }
        None => s.to_string(),
    }
}

/// Row-wise semantics of every operation; `args` must match the op's
/// argument kinds and share one row count. Any failing row fails the whole
/// application.
pub fn apply_rows(op: Op, args: &[&ValueData], limits: &EvalLimits) -> Result<ValueData, EvalError> {
    let d = op.descriptor();
    if args.len() != d.arity() || args.iter().zip(d.arg_kinds).any(|(a, k)| a.kind() != *k) {
        return Err(EvalError::Mismatch { op: d.name });
    }
    let n = args[0].len();
    if args.iter().any(|a| a.len() != n) {
        return Err(EvalError::Mismatch { op: d.name });
    }
    let name = d.name;
    let s = |j: usize| args[j].as_strs().unwrap_or_default();
    let i = |j: usize| args[j].as_ints().unwrap_or_default();
    let bad = |row| EvalError::BadArgument { op: name, row };

    let max_len = limits.max_string_length;
    let check_str = |row: usize, out: String| -> Result<String, EvalError> {
        if out.len() > max_len && char_len(&out) > max_len {
            Err(EvalError::StringTooLong { op: name, row })
        } else {
            Ok(out)
        }
    };
    let max_int = limits.max_integer_magnitude;
    let check_int = |row: usize, v: Option<i64>| -> Result<i64, EvalError> {
        match v {
            Some(v) if v.abs() <= max_int => Ok(v),
            _ => Err(EvalError::IntegerOverflow { op: name, row }),
        }
    };

    let strs = |f: &dyn Fn(usize) -> Result<String, EvalError>| -> Result<ValueData, EvalError> {
        let mut out = Vec::with_capacity(n);
        for row in 0..n {
            out.push(check_str(row, f(row)?)?);
        }
        Ok(ValueData::Str(out))
    };
    let ints = |f: &dyn Fn(usize) -> Result<i64, EvalError>| -> Result<ValueData, EvalError> {
        let mut out = Vec::with_capacity(n);
        for row in 0..n {
            out.push(f(row)?);
        }
        Ok(ValueData::Int(out))
    };

    match op {
        Op::Concatenate => {
            let (a, b) = (s(0), s(1));
            strs(&|r| {
                let mut out = String::with_capacity(a[r].len() + b[r].len());
                out.push_str(&a[r]);
                out.push_str(&b[r]);
                Ok(out)
            })
        }
        Op::Left => {
            let (a, k) = (s(0), i(1));
            strs(&|r| {
                if k[r] < 0 {
                    return Err(bad(r));
                }
                Ok(a[r][..byte_offset(&a[r], k[r] as usize)].to_string())
            })
        }
        Op::Right => {
            let (a, k) = (s(0), i(1));
            strs(&|r| {
                if k[r] < 0 {
                    return Err(bad(r));
                }
                let len = char_len(&a[r]);
                let keep = (k[r] as usize).min(len);
                Ok(a[r][byte_offset(&a[r], len - keep)..].to_string())
            })
        }
        Op::Mid => {
            let (a, start, count) = (s(0), i(1), i(2));
            strs(&|r| {
                if start[r] < 1 || count[r] < 0 {
                    return Err(bad(r));
                }
                let from = (start[r] - 1) as usize;
                let to = from.saturating_add(count[r] as usize);
                let text = &a[r];
                Ok(text[byte_offset(text, from)..byte_offset(text, to)].to_string())
            })
        }
        Op::Replace => {
            let (a, start, count, new) = (s(0), i(1), i(2), s(3));
            strs(&|r| {
                if start[r] < 1 || count[r] < 0 {
                    return Err(bad(r));
                }
                let from = (start[r] - 1) as usize;
                let to = from.saturating_add(count[r] as usize);
                let text = &a[r];
                let (bf, bt) = (byte_offset(text, from), byte_offset(text, to));
                let mut out = String::with_capacity(text.len() + new[r].len());
                out.push_str(&text[..bf]);
                out.push_str(&new[r]);
                out.push_str(&text[bt..]);
                Ok(out)
            })
        }
        Op::Trim => {
            let a = s(0);
            strs(&|r| Ok(a[r].trim().to_string()))
        }
        Op::Rept => {
            let (a, k) = (s(0), i(1));
            strs(&|r| {
                if k[r] < 0 {
                    return Err(bad(r));
                }
                if char_len(&a[r]).saturating_mul(k[r] as usize) > max_len {
                    return Err(EvalError::StringTooLong { op: name, row: r });
                }
                Ok(a[r].repeat(k[r] as usize))
            })
        }
        Op::Substitute => {
            let (a, from, to) = (s(0), s(1), s(2));
            strs(&|r| {
                if from[r].is_empty() {
                    Ok(a[r].clone())
                } else {
                    Ok(a[r].replace(from[r].as_str(), &to[r]))
                }
            })
        }
        Op::SubstituteNth => {
            let (a, from, to, nth) = (s(0), s(1), s(2), i(3));
            strs(&|r| {
                if nth[r] < 1 {
                    return Err(bad(r));
                }
                if from[r].is_empty() {
                    Ok(a[r].clone())
                } else {
                    Ok(substitute_nth(&a[r], &from[r], &to[r], nth[r] as usize))
                }
            })
        }
        Op::ToText => {
            let a = i(0);
            strs(&|r| Ok(a[r].to_string()))
        }
        Op::Lower => {
            let a = s(0);
            strs(&|r| Ok(a[r].to_lowercase()))
        }
        Op::Upper => {
            let a = s(0);
            strs(&|r| Ok(a[r].to_uppercase()))
        }
        Op::Proper => {
            let a = s(0);
            strs(&|r| Ok(proper(&a[r])))
        }
        Op::Add => {
            let (a, b) = (i(0), i(1));
            ints(&|r| check_int(r, a[r].checked_add(b[r])))
        }
        Op::Minus => {
            let (a, b) = (i(0), i(1));
            ints(&|r| check_int(r, a[r].checked_sub(b[r])))
        }
        Op::Find => {
            let (needle, hay) = (s(0), s(1));
            ints(&|r| match hay[r].find(needle[r].as_str()) {
                Some(at) => Ok(char_len(&hay[r][..at]) as i64 + 1),
                None => Err(EvalError::NotFound { row: r }),
            })
        }
        Op::FindFrom => {
            let (needle, hay, start) = (s(0), s(1), i(2));
            ints(&|r| {
                let text = &hay[r];
                if start[r] < 1 || start[r] as usize > char_len(text) {
                    return Err(bad(r));
                }
                let from = byte_offset(text, start[r] as usize - 1);
                match text[from..].find(needle[r].as_str()) {
                    Some(at) => Ok(char_len(&text[..from + at]) as i64 + 1),
                    None => Err(EvalError::NotFound { row: r }),
                }
            })
        }
        Op::Len => {
            let a = s(0);
            ints(&|r| Ok(char_len(&a[r]) as i64))
        }
    }
}
