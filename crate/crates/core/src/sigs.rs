//! Property signatures: fixed-layout summaries of how a set of boolean
//! properties behaves across all example rows.
//!
//! Each property is evaluated per row and the row results are folded into a
//! [`SigSymbol`]. Two layouts exist:
//!
//! * IO (length 107): 14 string properties of the output, then for each of
//!   the [`MAX_INPUTS`] input slots the 14 string properties of that input
//!   followed by the 17 (input, output) pair properties. Slots past the
//!   task's input count are all [`SigSymbol::Padding`].
//! * VO (length 45): for a candidate value, 14 string properties, 17
//!   (value, output) pair properties, 7 integer properties, and 7
//!   (integer, output) pair properties. The blocks that do not apply to the
//!   value's kind are padding.

use serde::{Deserialize, Serialize};

use crate::dsl::{Task, ValueData, MAX_INPUTS};

pub const NUM_STRING_PROPS: usize = 14;
pub const NUM_STRING_PAIR_PROPS: usize = 17;
pub const NUM_INT_PROPS: usize = 7;
pub const NUM_INT_PAIR_PROPS: usize = 7;

pub const IO_SIG_LEN: usize = NUM_STRING_PROPS + MAX_INPUTS * (NUM_STRING_PROPS + NUM_STRING_PAIR_PROPS);
pub const VO_SIG_LEN: usize = NUM_STRING_PROPS + NUM_STRING_PAIR_PROPS + NUM_INT_PROPS + NUM_INT_PAIR_PROPS;
pub const FEATURE_LEN: usize = IO_SIG_LEN + VO_SIG_LEN;

pub const STRING_PROP_NAMES: [&str; NUM_STRING_PROPS] = [
    "is empty?",
    "is single char?",
    "is short string?",
    "is lowercase?",
    "is uppercase?",
    "contains space?",
    "contains comma?",
    "contains period?",
    "contains dash?",
    "contains slash?",
    "contains digits?",
    "only digits?",
    "contains letters?",
    "only letters?",
];

pub const STRING_PAIR_PROP_NAMES: [&str; NUM_STRING_PAIR_PROPS] = [
    "output contains input?",
    "output starts with input?",
    "output ends with input?",
    "input contains output?",
    "input starts with output?",
    "input ends with output?",
    "output contains input ignoring case?",
    "output starts with input ignoring case?",
    "output ends with input ignoring case?",
    "input contains output ignoring case?",
    "input starts with output ignoring case?",
    "input ends with output ignoring case?",
    "input equals output?",
    "input equals output ignoring case?",
    "input same length as output?",
    "input shorter than output?",
    "input longer than output?",
];

pub const INT_PROP_NAMES: [&str; NUM_INT_PROPS] = [
    "is zero?",
    "is one?",
    "is two?",
    "is negative?",
    "is small integer?",
    "is medium integer?",
    "is large integer?",
];

pub const INT_PAIR_PROP_NAMES: [&str; NUM_INT_PAIR_PROPS] = [
    "is less than output length?",
    "is less or equal to output length?",
    "is equal to output length?",
    "is greater or equal to output length?",
    "is greater than output length?",
    "is very close to output length?",
    "is close to output length?",
];

/// Offsets of the pair-property block for input slot `k` in an IO signature.
pub fn io_pair_block(k: usize) -> usize {
    NUM_STRING_PROPS + k * (NUM_STRING_PROPS + NUM_STRING_PAIR_PROPS) + NUM_STRING_PROPS
}

/// Offset of the single-string block for input slot `k` in an IO signature.
pub fn io_input_block(k: usize) -> usize {
    NUM_STRING_PROPS + k * (NUM_STRING_PROPS + NUM_STRING_PAIR_PROPS)
}

pub const VO_STRING_PAIR_BLOCK: usize = NUM_STRING_PROPS;
pub const VO_INT_BLOCK: usize = NUM_STRING_PROPS + NUM_STRING_PAIR_PROPS;
pub const VO_INT_PAIR_BLOCK: usize = VO_INT_BLOCK + NUM_INT_PROPS;

/// How one property behaved over all rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SigSymbol {
    AllTrue,
    AllFalse,
    Mixed,
    Padding,
}

impl SigSymbol {
    pub const ALL: [SigSymbol; 4] = [SigSymbol::AllTrue, SigSymbol::AllFalse, SigSymbol::Mixed, SigSymbol::Padding];

    /// Wire encoding: 1, -1, 0, 2.
    pub fn to_i8(self) -> i8 {
        match self {
            SigSymbol::AllTrue => 1,
            SigSymbol::AllFalse => -1,
            SigSymbol::Mixed => 0,
            SigSymbol::Padding => 2,
        }
    }

    pub fn from_i8(v: i8) -> Option<SigSymbol> {
        match v {
            1 => Some(SigSymbol::AllTrue),
            -1 => Some(SigSymbol::AllFalse),
            0 => Some(SigSymbol::Mixed),
            2 => Some(SigSymbol::Padding),
            _ => None,
        }
    }

    /// Row of the embedding table for this symbol.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl Serialize for SigSymbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.to_i8())
    }
}

impl<'de> Deserialize<'de> for SigSymbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i8::deserialize(d)?;
        SigSymbol::from_i8(v).ok_or_else(|| serde::de::Error::custom(format!("invalid signature symbol {v}")))
    }
}

/// Folds per-row results of one property.
pub fn aggregate(bools: &[bool]) -> SigSymbol {
    debug_assert!(!bools.is_empty());
    if bools.iter().all(|&b| b) {
        SigSymbol::AllTrue
    } else if bools.iter().all(|&b| !b) {
        SigSymbol::AllFalse
    } else {
        SigSymbol::Mixed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    Io,
    Vo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub layout: Layout,
    pub symbols: Vec<SigSymbol>,
}

impl Signature {
    pub fn to_i8s(&self) -> Vec<i8> {
        self.symbols.iter().map(|s| s.to_i8()).collect()
    }
}

pub fn string_props(s: &str) -> [bool; NUM_STRING_PROPS] {
    unpack(string_prop_bits(s))
}

pub fn int_props(i: i64) -> [bool; NUM_INT_PROPS] {
    unpack(int_prop_bits(i))
}

pub fn string_pair_props(s: &str, out: &str) -> [bool; NUM_STRING_PAIR_PROPS] {
    let sl = s.to_lowercase();
    let ol = out.to_lowercase();
    unpack(string_pair_bits(s, &sl, char_count(s), out, &ol, char_count(out)))
}

pub fn int_pair_props(i: i64, out: &str) -> [bool; NUM_INT_PAIR_PROPS] {
    unpack(int_pair_bits(i, char_count(out) as i64))
}

fn unpack<const N: usize>(bits: u32) -> [bool; N] {
    std::array::from_fn(|k| bits & (1 << k) != 0)
}

fn char_count(s: &str) -> usize {
    if s.is_ascii() {
        s.len()
    } else {
        s.chars().count()
    }
}

fn string_prop_bits(s: &str) -> u32 {
    let len = char_count(s);
    let has_digit = s.bytes().any(|b| b.is_ascii_digit());
    let only_digits = !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    let has_letter = s.bytes().any(|b| b.is_ascii_alphabetic());
    let only_letters = !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphabetic());
    let (is_lower, is_upper) = if s.is_ascii() {
        (!s.bytes().any(|b| b.is_ascii_uppercase()), !s.bytes().any(|b| b.is_ascii_lowercase()))
    } else {
        (s == s.to_lowercase(), s == s.to_uppercase())
    };
    let flags = [
        s.is_empty(),
        len == 1,
        len <= 5,
        is_lower,
        is_upper,
        s.contains(' '),
        s.contains(','),
        s.contains('.'),
        s.contains('-'),
        s.contains('/'),
        has_digit,
        only_digits,
        has_letter,
        only_letters,
    ];
    pack(&flags)
}

fn string_pair_bits(s: &str, sl: &str, slen: usize, out: &str, ol: &str, olen: usize) -> u32 {
    let flags = [
        out.contains(s),
        out.starts_with(s),
        out.ends_with(s),
        s.contains(out),
        s.starts_with(out),
        s.ends_with(out),
        ol.contains(sl),
        ol.starts_with(sl),
        ol.ends_with(sl),
        sl.contains(ol),
        sl.starts_with(ol),
        sl.ends_with(ol),
        s == out,
        sl == ol,
        slen == olen,
        slen < olen,
        slen > olen,
    ];
    pack(&flags)
}

fn int_prop_bits(i: i64) -> u32 {
    let flags = [i == 0, i == 1, i == 2, i < 0, 0 < i && i <= 3, 3 < i && i <= 9, 9 < i];
    pack(&flags)
}

fn int_pair_bits(i: i64, olen: i64) -> u32 {
    let flags = [
        i < olen,
        i <= olen,
        i == olen,
        i >= olen,
        i > olen,
        (i - olen).abs() <= 1,
        (i - olen).abs() <= 3,
    ];
    pack(&flags)
}

fn pack(flags: &[bool]) -> u32 {
    flags.iter().enumerate().fold(0, |acc, (k, &f)| acc | (u32::from(f) << k))
}

/// Per-row AND and OR of property bitmasks; folding them gives the symbols.
#[derive(Clone, Copy)]
struct Fold {
    all: u32,
    any: u32,
}

impl Fold {
    fn new() -> Fold {
        Fold { all: u32::MAX, any: 0 }
    }

    fn add(&mut self, bits: u32) {
        self.all &= bits;
        self.any |= bits;
    }

    fn emit(self, count: usize, out: &mut Vec<SigSymbol>) {
        for k in 0..count {
            let bit = 1 << k;
            out.push(if self.all & bit != 0 {
                SigSymbol::AllTrue
            } else if self.any & bit == 0 {
                SigSymbol::AllFalse
            } else {
                SigSymbol::Mixed
            });
        }
    }
}

fn pad(count: usize, out: &mut Vec<SigSymbol>) {
    out.extend(std::iter::repeat_n(SigSymbol::Padding, count));
}

/// Output rows with their lowercase forms and lengths, computed once per
/// task and reused for every candidate value.
#[derive(Debug, Clone)]
pub struct OutputInfo {
    outputs: Vec<String>,
    lower: Vec<String>,
    lens: Vec<usize>,
}

impl OutputInfo {
    pub fn new(outputs: &[String]) -> OutputInfo {
        OutputInfo {
            outputs: outputs.to_vec(),
            lower: outputs.iter().map(|o| o.to_lowercase()).collect(),
            lens: outputs.iter().map(|o| char_count(o)).collect(),
        }
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    fn pair_fold(&self, values: &[String]) -> Fold {
        let mut f = Fold::new();
        for (r, v) in values.iter().enumerate() {
            let vl = lower_of(v);
            f.add(string_pair_bits(v, &vl, char_count(v), &self.outputs[r], &self.lower[r], self.lens[r]));
        }
        f
    }

    /// VO signature of `value` against these outputs.
    pub fn vo_signature(&self, value: &ValueData) -> Signature {
        debug_assert_eq!(value.len(), self.outputs.len());
        let mut symbols = Vec::with_capacity(VO_SIG_LEN);
        match value {
            ValueData::Str(rows) => {
                let mut single = Fold::new();
                for v in rows {
                    single.add(string_prop_bits(v));
                }
                single.emit(NUM_STRING_PROPS, &mut symbols);
                self.pair_fold(rows).emit(NUM_STRING_PAIR_PROPS, &mut symbols);
                pad(NUM_INT_PROPS + NUM_INT_PAIR_PROPS, &mut symbols);
            }
            ValueData::Int(rows) => {
                pad(NUM_STRING_PROPS + NUM_STRING_PAIR_PROPS, &mut symbols);
                let mut single = Fold::new();
                let mut pair = Fold::new();
                for (r, &i) in rows.iter().enumerate() {
                    single.add(int_prop_bits(i));
                    pair.add(int_pair_bits(i, self.lens[r] as i64));
                }
                single.emit(NUM_INT_PROPS, &mut symbols);
                pair.emit(NUM_INT_PAIR_PROPS, &mut symbols);
            }
        }
        Signature {
            layout: Layout::Vo,
            symbols,
        }
    }
}

fn lower_of(s: &str) -> std::borrow::Cow<'_, str> {
    if s.is_ascii() && !s.bytes().any(|b| b.is_ascii_uppercase()) {
        std::borrow::Cow::Borrowed(s)
    } else {
        std::borrow::Cow::Owned(s.to_lowercase())
    }
}

/// IO signature of a task: output properties plus, per input slot, input
/// properties and (input, output) pair properties.
pub fn io_signature(task: &Task) -> Signature {
    io_signature_for(&task.inputs, &task.outputs)
}

/// IO signature for explicit input columns and outputs.
pub fn io_signature_for(inputs: &[Vec<String>], outputs: &[String]) -> Signature {
    let info = OutputInfo::new(outputs);
    let mut symbols = Vec::with_capacity(IO_SIG_LEN);
    let mut out_fold = Fold::new();
    for o in outputs {
        out_fold.add(string_prop_bits(o));
    }
    out_fold.emit(NUM_STRING_PROPS, &mut symbols);
    for k in 0..MAX_INPUTS {
        match inputs.get(k) {
            Some(col) => {
                let mut single = Fold::new();
                for v in col {
                    single.add(string_prop_bits(v));
                }
                single.emit(NUM_STRING_PROPS, &mut symbols);
                info.pair_fold(col).emit(NUM_STRING_PAIR_PROPS, &mut symbols);
            }
            None => pad(NUM_STRING_PROPS + NUM_STRING_PAIR_PROPS, &mut symbols),
        }
    }
    Signature {
        layout: Layout::Io,
        symbols,
    }
}

/// VO signature of a candidate value against the outputs.
pub fn vo_signature(value: &ValueData, outputs: &[String]) -> Signature {
    OutputInfo::new(outputs).vo_signature(value)
}

/// Model input: IO symbols followed by VO symbols.
pub fn model_features(sio: &Signature, svo: &Signature) -> Vec<SigSymbol> {
    debug_assert_eq!(sio.layout, Layout::Io);
    debug_assert_eq!(svo.layout, Layout::Vo);
    let mut out = Vec::with_capacity(FEATURE_LEN);
    out.extend_from_slice(&sio.symbols);
    out.extend_from_slice(&svo.symbols);
    out
}

/// Human-readable name of each IO signature position.
pub fn io_position_names() -> Vec<String> {
    let mut names: Vec<String> = STRING_PROP_NAMES.iter().map(|n| format!("output: {n}")).collect();
    for k in 0..MAX_INPUTS {
        names.extend(STRING_PROP_NAMES.iter().map(|n| format!("var_{k}: {n}")));
        names.extend(STRING_PAIR_PROP_NAMES.iter().map(|n| format!("var_{k} vs output: {n}")));
    }
    names
}

/// Human-readable name of each VO signature position.
pub fn vo_position_names() -> Vec<String> {
    let mut names: Vec<String> = STRING_PROP_NAMES.iter().map(|n| format!("value: {n}")).collect();
    names.extend(STRING_PAIR_PROP_NAMES.iter().map(|n| format!("value vs output: {n}")));
    names.extend(INT_PROP_NAMES.iter().map(|n| format!("value: {n}")));
    names.extend(INT_PAIR_PROP_NAMES.iter().map(|n| format!("value vs output: {n}")));
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use SigSymbol::*;

    const T: bool = true;
    const F: bool = false;

    fn task(pairs: &[(&str, &str)]) -> Task {
        Task::from_pairs("t", pairs).unwrap()
    }

    #[test]
    fn layout_lengths() {
        assert_eq!(IO_SIG_LEN, 107);
        assert_eq!(VO_SIG_LEN, 45);
        assert_eq!(FEATURE_LEN, 152);
        assert_eq!(io_position_names().len(), IO_SIG_LEN);
        assert_eq!(vo_position_names().len(), VO_SIG_LEN);
    }

    #[test]
    fn string_property_examples() {
        // Direct evaluation of the 14 predicates on the empty string.
        assert_eq!(string_props(""), [T, F, T, T, T, F, F, F, F, F, F, F, F, F]);
        let abc = string_props("abc");
        assert!(abc[3] && !abc[4] && abc[13]);
        let slash = string_props("a/b");
        assert!(slash[9] && !slash[8]);
        assert_eq!(string_props("123"), [F, F, T, T, T, F, F, F, F, F, T, T, F, F]);
    }

    #[test]
    fn int_property_examples() {
        assert_eq!(int_props(0), [T, F, F, F, F, F, F]);
        assert_eq!(int_props(2), [F, F, T, F, T, F, F]);
        assert_eq!(int_props(10), [F, F, F, F, F, F, T]);
        assert_eq!(int_props(-4), [F, F, F, T, F, F, F]);
        assert_eq!(int_props(9), [F, F, F, F, F, T, F]);
    }

    #[test]
    fn pair_property_examples() {
        assert!(string_pair_props("butter", "butterfly")[0]);
        let p = string_pair_props("xyz", "XYZ_");
        assert!(!p[0]);
        assert!(p[6]);
        for s in ["", "abc", "Hello, World"] {
            let p = string_pair_props(s, s);
            assert!(p[12] && p[13] && p[14] && !p[15] && !p[16]);
        }
    }

    #[test]
    fn int_pair_examples() {
        assert_eq!(int_pair_props(5, "abcde"), [F, T, T, T, F, T, T]);
        let z = int_pair_props(0, "");
        assert!(z[2] && z[5] && z[6]);
        assert_eq!(int_pair_props(9, "abcde"), [F, F, F, T, T, F, F]);
    }

    #[test]
    fn aggregation() {
        assert_eq!(aggregate(&[T, T, F]), Mixed);
        assert_eq!(aggregate(&[F, F, F]), AllFalse);
        assert_eq!(aggregate(&[T, T, T]), AllTrue);
        assert_eq!(aggregate(&[T]), AllTrue);
        assert_eq!(aggregate(&[F, T]), Mixed);
    }

    #[test]
    fn date_depth_acronym_trio() {
        let t = task(&[("butter", "butterfly"), ("abc", "abc_"), ("xyz", "XYZ_")]);
        let sig = io_signature(&t);
        let base = io_pair_block(0);
        let got = [sig.symbols[base], sig.symbols[base + 2], sig.symbols[base + 6]];
        assert_eq!(got, [Mixed, AllFalse, AllTrue]);
    }

    #[test]
    fn unused_input_slots_are_padding() {
        let t = task(&[("a", "b")]);
        let sig = io_signature(&t);
        assert_eq!(sig.symbols.len(), IO_SIG_LEN);
        assert!(sig.symbols[io_input_block(1)..].iter().all(|&s| s == Padding));
        assert!(sig.symbols[..io_input_block(1)].iter().all(|&s| s != Padding));
    }

    #[test]
    fn identical_io_equality_is_all_true() {
        let t = task(&[("ab", "ab"), ("c d", "c d")]);
        assert_eq!(io_signature(&t).symbols[io_pair_block(0) + 12], AllTrue);
    }

    #[test]
    fn vo_kind_padding() {
        let outputs = vec!["4".to_string(), "1".into(), "2".into()];
        let sig = vo_signature(&ValueData::Int(vec![4, 1, 2]), &outputs);
        assert!(sig.symbols[..VO_INT_BLOCK].iter().all(|&s| s == Padding));
        // is small integer? 4 is medium, 1 and 2 are small.
        assert_eq!(sig.symbols[VO_INT_BLOCK + 4], Mixed);
        assert_eq!(sig.symbols[VO_INT_BLOCK + 5], Mixed);
        let s = vo_signature(&ValueData::Str(outputs.clone()), &outputs);
        assert_eq!(s.symbols[VO_STRING_PAIR_BLOCK + 12], AllTrue);
        assert!(s.symbols[VO_INT_BLOCK..].iter().all(|&s| s == Padding));
    }

    #[test]
    fn bitmask_path_matches_direct_predicates() {
        let rows = ["Abc", "x y", "", "12-3", "ÉTÉ", "a/b.c,d"];
        let outs = ["abc", "X Y!", "q", "12", "été", "a"];
        for (v, o) in rows.iter().zip(outs) {
            let sig = vo_signature(&ValueData::Str(vec![v.to_string()]), &[o.to_string()]);
            let direct: Vec<SigSymbol> = string_props(v)
                .iter()
                .chain(string_pair_props(v, o).iter())
                .map(|&b| aggregate(&[b]))
                .collect();
            assert_eq!(&sig.symbols[..31], &direct[..]);
        }
    }

    #[test]
    fn symbol_wire_encoding() {
        let sig = Signature {
            layout: Layout::Vo,
            symbols: vec![AllTrue, AllFalse, Mixed, Padding],
        };
        assert_eq!(sig.to_i8s(), vec![1, -1, 0, 2]);
        let json = serde_json::to_string(&sig.symbols).unwrap();
        assert_eq!(json, "[1,-1,0,2]");
        let back: Vec<SigSymbol> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sig.symbols);
        assert!(serde_json::from_str::<Vec<SigSymbol>>("[3]").is_err());
    }
}
