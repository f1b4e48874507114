use std::collections::BTreeSet;

use crate::dsl::{Leaf, Task, Value};

/// Delimiters and small integers that every search starts with.
pub const STRING_CONSTANTS: [&str; 5] = [" ", ",", ".", "-", "/"];
pub const INT_CONSTANTS: [i64; 5] = [0, 1, 2, 3, 99];

/// Longest substring mined from the outputs.
pub const MAX_MINED_LENGTH: usize = 15;

/// Substrings shared by every output that are not maximal within a longer
/// shared substring are dropped, as are any that occur among the inputs of
/// every example (those are reachable by slicing anyway).
pub fn mined_constants(task: &Task) -> Vec<String> {
    let first: Vec<char> = task.outputs[0].chars().collect();
    let mut common = BTreeSet::new();
    for start in 0..first.len() {
        for len in 1..=MAX_MINED_LENGTH.min(first.len() - start) {
            let sub: String = first[start..start + len].iter().collect();
            if !task.outputs[1..].iter().all(|o| o.contains(&sub)) {
                // Longer extensions of a missing substring are missing too.
                break;
            }
            common.insert(sub);
        }
    }
    let maximal: Vec<&String> = common
        .iter()
        .filter(|s| !common.iter().any(|t| t.len() > s.len() && t.contains(s.as_str())))
        .collect();
    let mut out: Vec<String> = maximal
        .into_iter()
        .filter(|s| !(0..task.num_examples()).all(|r| task.inputs.iter().any(|col| col[r].contains(s.as_str()))))
        .filter(|s| !STRING_CONSTANTS.contains(&s.as_str()))
        .cloned()
        .collect();
    out.sort_by(|a, b| a.chars().count().cmp(&b.chars().count()).then_with(|| a.cmp(b)));
    out
}

/// Weight-1 constant values for `task`: the fixed set first, then mined
/// strings when `mine` is set.
pub fn extract_constants(task: &Task, mine: bool) -> Vec<Value> {
    let mut leaves: Vec<Leaf> = STRING_CONSTANTS.iter().map(|s| Leaf::Str(s.to_string())).collect();
    leaves.extend(INT_CONSTANTS.iter().map(|&i| Leaf::Int(i)));
    if mine {
        leaves.extend(mined_constants(task).into_iter().map(Leaf::Str));
    }
    leaves
        .into_iter()
        .map(|l| {
            let data = l.data(task).unwrap_or_else(|_| unreachable!("literals always broadcast"));
            Value::leaf(l, data)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_constants_include_99() {
        let task = Task::from_pairs("t", &[("a", "a")]).unwrap();
        let consts = extract_constants(&task, true);
        assert!(consts.iter().any(|v| matches!(&v.provenance, crate::dsl::Provenance::Leaf(Leaf::Int(99)))));
        assert_eq!(consts.len(), 10);
    }

    #[test]
    fn mines_shared_prefix() {
        let task = Task::from_pairs("mr", &[("Smith", "Mr. Smith"), ("Jones", "Mr. Jones")]).unwrap();
        assert_eq!(mined_constants(&task), vec!["Mr. ".to_string()]);
    }

    #[test]
    fn nothing_shared() {
        let task = Task::from_pairs("t", &[("x", "a"), ("y", "b")]).unwrap();
        assert!(mined_constants(&task).is_empty());
        assert_eq!(extract_constants(&task, true).len(), 10);
    }

    #[test]
    fn input_substrings_are_skipped() {
        // "abc" is common to both outputs but occurs in each row's input.
        let task = Task::from_pairs("t", &[("abc1", "abc!"), ("2abc", "abc!")]).unwrap();
        assert_eq!(mined_constants(&task), vec!["abc!".to_string()]);
        let task = Task::from_pairs("t", &[("abc!", "abc!x"), ("abc!", "yabc!")]).unwrap();
        assert!(mined_constants(&task).is_empty());
    }

    #[test]
    fn ordered_by_length_then_text() {
        let task = Task::from_pairs("t", &[("q", "zz:b#"), ("q", "b#.zz:")]).unwrap();
        assert_eq!(mined_constants(&task), vec!["b#".to_string(), "zz:".to_string()]);
    }
}
