use sheetsynth_web::{evaluate_json, signature_json, synthesize_json, SignatureEntry, SynthResponse};

const DATE: &str = r#"{"name":"date","inputs":[["2020-01-15","1999-12-31"]],"output":["2020/01/15","1999/12/31"]}"#;

#[test]
fn synthesizes_and_round_trips_through_evaluate() {
    let req = format!(r#"{{"task":{DATE},"guidance":"heuristic","maxExpressions":100000}}"#);
    let r: SynthResponse = serde_json::from_str(&synthesize_json(&req).unwrap()).unwrap();
    assert!(r.solved);
    let formula = r.formula.unwrap();
    assert_eq!(evaluate_json(&formula, DATE).unwrap(), r#"["2020/01/15","1999/12/31"]"#);
}

#[test]
fn budget_exhaustion_is_reported() {
    let task = r#"{"name":"t","inputs":[["abc","def"]],"output":["Q7","W9"]}"#;
    let req = format!(r#"{{"task":{task},"guidance":"none","maxExpressions":500}}"#);
    let r: SynthResponse = serde_json::from_str(&synthesize_json(&req).unwrap()).unwrap();
    assert!(!r.solved && r.formula.is_none());
    assert_eq!(r.expressions, 500);
    assert_eq!(r.termination, "ExpressionBudget");
}

#[test]
fn bad_requests_are_errors() {
    let req = format!(r#"{{"task":{DATE},"guidance":"model"}}"#);
    assert!(synthesize_json(&req).unwrap_err().contains("weights"));
    let req = format!(r#"{{"task":{DATE},"guidance":"oracle"}}"#);
    assert!(synthesize_json(&req).is_err());
    assert!(synthesize_json("{").is_err());
    assert!(evaluate_json("LEN(", DATE).is_err());
    assert!(evaluate_json("IF(var_0, 1, 2)", DATE).unwrap_err().contains("IF"));
}

#[test]
fn signature_skips_padding() {
    let entries: Vec<SignatureEntry> = serde_json::from_str(&signature_json(DATE).unwrap()).unwrap();
    // Output properties plus one input's own and paired properties.
    assert_eq!(entries.len(), 14 + 14 + 17);
    let find = |p: &str| entries.iter().find(|e| e.property == p).unwrap().symbol.as_str();
    assert_eq!(find("output: contains slash?"), "AllTrue");
    assert_eq!(find("var_0: contains dash?"), "AllTrue");
    assert_eq!(find("var_0 vs output: input same length as output?"), "AllTrue");
}
