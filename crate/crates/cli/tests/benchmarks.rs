use std::path::Path;

use sheetsynth::dsl::{parse_formula, ParseError};
use sheetsynth_cli::bench::{load_benchmarks, load_case, BenchError};

fn suite() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")
}

#[test]
fn shipped_suite_loads() {
    let cases = load_benchmarks(&suite()).unwrap();
    assert_eq!(cases.len(), 56);
    let provided: Vec<&str> = cases.iter().filter(|c| c.showcase).map(|c| c.task.name.as_str()).collect();
    assert_eq!(provided.len(), 3);
    for c in &cases {
        let reference = c.reference.as_deref().unwrap();
        // Only superset formulas skip the reference check.
        assert_eq!(
            c.reference_checked,
            !matches!(parse_formula(reference), Err(ParseError::UnknownFunction { .. })),
            "{}",
            c.task.name
        );
        assert!(c.task.outputs.len() >= 2 && c.task.inputs.len() <= 3, "{}", c.task.name);
    }
    for c in cases.iter().filter(|c| c.showcase) {
        assert!(c.reference_checked, "{}", c.task.name);
    }
    let names: std::collections::HashSet<_> = cases.iter().map(|c| &c.task.name).collect();
    assert_eq!(names.len(), 56);
}

#[test]
fn wrong_outputs_fail_reference_validation() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(
        &p,
        r#"{"name":"len","inputs":[["ab","c"]],"output":["2","2"],"reference":"TO_TEXT(LEN(var_0))"}"#,
    )
    .unwrap();
    assert!(matches!(load_case(&p), Err(BenchError::Validation { .. })));

    std::fs::write(&p, r#"{"name":"doc","inputs":[["ab"]],"output":["x"],"reference":"IF(var_0=\"ab\", \"x\", \"y\")"}"#).unwrap();
    let case = load_case(&p).unwrap();
    assert!(!case.reference_checked);

    std::fs::write(&p, r#"{"name":"broken","inputs":[["ab"]],"output":["x"],"reference":"LEN(var_0"}"#).unwrap();
    assert!(matches!(load_case(&p), Err(BenchError::Reference { .. })));
}
