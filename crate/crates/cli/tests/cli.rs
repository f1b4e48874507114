use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sheetsynth"))
        .args(args)
        .env_remove("BUSTLE_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn benchmark(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks");
    std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().contains(name))
        .unwrap_or_else(|| panic!("no benchmark matching {name}"))
}

fn write_task(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn identity_task_is_solved_at_seeding() {
    let dir = tempfile::tempdir().unwrap();
    let task = write_task(dir.path(), "id.json", r#"{"name":"id","inputs":[["a","bc"]],"output":["a","bc"]}"#);
    let out = run(&["synthesize", "--task", &task]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "var_0");
    assert_eq!(lines[1], "expressions: 0");
    assert!(lines[2].starts_with("elapsed: ") && lines[2].ends_with('s'));
}

#[test]
fn unsolved_search_exits_two() {
    let task = benchmark("longest_common_suffix");
    let out = run(&["synthesize", "--task", task.to_str().unwrap(), "--max-expressions", "1000"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).starts_with("UNSOLVED\nexpressions: 1000\n"));
}

#[test]
fn synthesizes_a_benchmark() {
    let task = benchmark("rest_of_a_word_given_a_prefix");
    let out = run(&["synthesize", "--task", task.to_str().unwrap(), "--guidance", "heuristic"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let formula = stdout(&out).lines().next().unwrap().to_string();
    let eval = run(&["eval", "--formula", &formula, "--task", task.to_str().unwrap()]);
    assert_eq!(stdout(&eval).trim(), r#"["happy","fix","write"]"#);
}

#[test]
fn usage_errors_exit_one() {
    let task = benchmark("length_of_string");
    let task = task.to_str().unwrap();
    for args in [
        vec!["synthesize", "--task", task, "--guidance", "model"],
        vec!["synthesize", "--task", task, "--max-expressions", "0"],
        vec!["synthesize", "--task", task, "--guidance", "bogus"],
        vec!["train", "--data", "x.jsonl", "--out", "m.json", "--epochs", "0"],
        vec!["bench", "--modes", "model"],
        vec!["bench", "--modes", "premise"],
        vec!["gen-data", "--out", "d.jsonl", "--searches", "0"],
        vec!["eval", "--formula", "LEN(", "--task", task],
        vec!["frobnicate"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
    assert!(run(&["--help"]).status.success());
}

#[test]
fn missing_task_file_fails_cleanly() {
    let out = run(&["synthesize", "--task", "/nonexistent/task.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/task.json"));
}

#[test]
fn pipeline_from_data_to_guided_search() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let out = run(&["gen-data", "--out", &p("d.jsonl"), "--searches", "8", "--budget", "5000", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stats: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(stats["kind"], "guidance");
    let header = std::fs::read_to_string(p("d.jsonl")).unwrap();
    assert!(header.starts_with("{\"stats\":"));

    let out = run(&["train", "--data", &p("d.jsonl"), "--out", &p("m.json"), "--epochs", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(metrics["validationAccuracy"].is_f64());

    // A guidance model is not a premise model.
    let task = benchmark("length_of_string");
    let task = task.to_str().unwrap();
    let wrong = run(&["synthesize", "--task", task, "--premise", &p("m.json")]);
    assert_eq!(wrong.status.code(), Some(1));

    let out = run(&["synthesize", "--task", task, "--guidance", "combined", "--model", &p("m.json")]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().next(), Some("TO_TEXT(LEN(var_0))"));
}

fn results_without_seconds(p: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().enumerate().filter(|(i, _)| *i != 4).map(|(_, f)| f.to_string()).collect())
        .collect()
}

#[test]
fn bench_parallel_matches_serial_and_report_redraws() {
    let dir = tempfile::tempdir().unwrap();
    let cases = dir.path().join("cases");
    std::fs::create_dir(&cases).unwrap();
    for name in ["length_of_string", "prepend_mr_to_last_name", "add_plus_sign", "yes_if_at_least"] {
        let src = benchmark(name);
        std::fs::copy(&src, cases.join(src.file_name().unwrap())).unwrap();
    }
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let cases = cases.to_str().unwrap();
    for (out, parallel) in [("serial", "1"), ("parallel", "3")] {
        let o = run(&[
            "bench", "--benchmarks", cases, "--modes", "none,heuristic", "--max-expressions", "300000",
            "--parallel", parallel, "--out", &p(out), "--quiet",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let serial = Path::new(&p("serial")).join("results.csv");
    assert_eq!(results_without_seconds(&serial), results_without_seconds(&Path::new(&p("parallel")).join("results.csv")));
    let rows = results_without_seconds(&serial);
    assert_eq!(rows.len(), 8);
    assert_eq!(rows.iter().filter(|r| r[2] == "1").count(), 6, "{rows:?}");

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(Path::new(&p("serial")).join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["cases"], 4);
    assert_eq!(summary["soundnessViolations"].as_array().unwrap().len(), 0);

    let o = run(&["report", "--results", serial.to_str().unwrap(), "--out", &p("redrawn")]);
    assert!(o.status.success());
    for svg in ["solved_vs_expressions.svg", "solved_vs_seconds.svg"] {
        let a = std::fs::read(Path::new(&p("serial")).join(svg)).unwrap();
        let b = std::fs::read(Path::new(&p("redrawn")).join(svg)).unwrap();
        assert_eq!(a, b, "{svg}");
    }
}
