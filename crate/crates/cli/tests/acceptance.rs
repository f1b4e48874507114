//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary so the PASS/FAIL lines are never captured:
//! `cargo test -p sheetsynth-cli --test acceptance`. Exits non-zero if any
//! criterion fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sheetsynth::datagen::{build_dataset, build_premise_dataset, GenConfig};
use sheetsynth::dsl::{parse_formula, EvalLimits, Expr, Kind, Op, Task, ValueData};
use sheetsynth::model::{
    init_params, train_classifier, train_op_classifier, Hyper, Label, Metrics, ModelKind, ModelParams, Scorer,
};
use sheetsynth::search::{
    bin_probability, extract_constants, synthesize, synthesize_with, SearchConfig, Termination,
};
use sheetsynth::sigs::{io_pair_block, io_signature, SigSymbol};
use sheetsynth_cli::bench::{load_benchmarks, run_bench, BenchReport, BenchSettings, Mode, ModeTotals, FINE_BINS};

const BENCH_BUDGET: u64 = 1_000_000;
const TRAIN_SEARCHES: usize = 100;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn benchmarks_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")
}

// ---------------------------------------------------------------------------
// 1, 2: fixed tables

fn signature_golden() -> Check {
    let task = Task::from_pairs("trio", &[("butter", "butterfly"), ("abc", "abc_"), ("xyz", "XYZ_")]).unwrap();
    let sig = io_signature(&task);
    let base = io_pair_block(0);
    // output contains input, output ends with input, output contains input ignoring case
    let got = [sig.symbols[base], sig.symbols[base + 2], sig.symbols[base + 6]];
    let want = [SigSymbol::Mixed, SigSymbol::AllFalse, SigSymbol::AllTrue];
    ensure(got == want, format!("{got:?}"))
}

fn binning_table() -> Check {
    let probs = [0.0, 0.05, 0.1, 0.35, 0.4, 0.59, 0.6, 1.0];
    let want = [0, 0, 1, 3, 4, 4, 5, 5];
    let got: Vec<u32> = probs.iter().map(|&p| bin_probability(p).unwrap()).collect();
    ensure(got == want, format!("{got:?}"))
}

// ---------------------------------------------------------------------------
// 3: enumeration against plain recursion

/// Every well-typed expression of exactly weight `w`, without value sharing.
fn all_exprs(w: u32, kind: Kind, ops: &[Op], leaves: &[(Expr, Kind)]) -> Vec<Expr> {
    if w == 1 {
        return leaves.iter().filter(|(_, k)| *k == kind).map(|(e, _)| e.clone()).collect();
    }
    let mut out = Vec::new();
    for &op in ops {
        let desc = op.descriptor();
        if desc.return_kind != kind || desc.arg_kinds.len() as u32 > w - 1 {
            continue;
        }
        let mut stack = vec![(Vec::<Expr>::new(), w - 1)];
        while let Some((args, left)) = stack.pop() {
            let i = args.len();
            if i == desc.arg_kinds.len() {
                if left == 0 {
                    out.push(Expr::call(op, args));
                }
                continue;
            }
            for wi in 1..=left {
                for e in all_exprs(wi, desc.arg_kinds[i], ops, leaves) {
                    let mut next = args.clone();
                    next.push(e);
                    stack.push((next, left - wi));
                }
            }
        }
    }
    out
}

fn enumeration_completeness() -> Check {
    let ops = [Op::Concatenate, Op::Left, Op::Len];
    let task = Task::from_pairs("bank", &[("ab-c", "\u{1}"), ("x/yz", "\u{1}")]).unwrap();
    let config = SearchConfig {
        ops: Some(ops.to_vec()),
        max_weight: 6,
        max_expressions: u64::MAX,
        mine_constants: false,
        ..SearchConfig::default()
    };
    let (result, bank) = synthesize_with(&task, &config, &mut |_| {}).unwrap();
    if result.termination != Termination::WeightBudget {
        return Err(format!("search stopped by {:?}", result.termination));
    }
    let mut leaves = vec![(Expr::var(0), Kind::Str)];
    leaves.extend(extract_constants(&task, false).iter().map(|c| (c.to_expr(), c.kind())));
    let mut expected: HashSet<ValueData> = HashSet::new();
    let mut trees = 0usize;
    for w in 1..=6 {
        for kind in [Kind::Str, Kind::Int] {
            for e in all_exprs(w, kind, &ops, &leaves) {
                trees += 1;
                if let Ok(v) = e.eval(&task, &EvalLimits::default()) {
                    expected.insert(v.data);
                }
            }
        }
    }
    let stored: HashSet<ValueData> = bank.values().map(|v| v.data.clone()).collect();
    ensure(
        stored == expected && stored.len() == result.values_stored,
        format!("{} stored, {} distinct from {trees} trees", result.values_stored, expected.len()),
    )
}

// ---------------------------------------------------------------------------
// 5: the three showcase tasks, unguided

fn showcase_tasks_unguided() -> Check {
    let tasks = [
        Task::from_pairs("depth", &[("/this/is/a/path", "4"), ("/home", "1"), ("/a/b", "2")]).unwrap(),
        Task::from_pairs("date", &[("08092019", "09/08/2019"), ("12032020", "03/12/2020")]).unwrap(),
        Task::from_pairs("acronym", &[("product area", "PA"), ("Vice president", "VP")]).unwrap(),
    ];
    let config = SearchConfig { max_expressions: BENCH_BUDGET, ..SearchConfig::default() };
    let mut parts = Vec::new();
    let mut ok = true;
    for task in &tasks {
        let r = synthesize(task, &config).unwrap();
        match &r.formula {
            Some(f) => {
                let single = Task::from_pairs("one", &[("12032020", "03/12/2020")]).unwrap();
                if task.name == "date" {
                    let out = parse_formula(f).unwrap().eval(&single, &EvalLimits::default());
                    ok &= out.is_ok_and(|v| v.data.matches_outputs(&single.outputs));
                }
                parts.push(format!("{} solved in {}", task.name, r.expressions_considered));
            }
            None => {
                ok = false;
                parts.push(format!("{} unsolved after {} (reached weight {})", task.name, r.expressions_considered, weight_reached(task)));
            }
        }
    }
    ensure(ok, parts.join("; "))
}

/// Highest weight the unguided search fully enumerates within the budget.
fn weight_reached(task: &Task) -> u32 {
    let mut last = 0;
    let config = SearchConfig { max_expressions: BENCH_BUDGET, ..SearchConfig::default() };
    let _ = synthesize_with(task, &config, &mut |p| last = p.weight);
    last
}

// ---------------------------------------------------------------------------
// 6: gradients against central differences

fn gradient_check() -> Check {
    let hyper = Hyper::guidance();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for batch in 0..5u64 {
        let mut m = init_params(ModelKind::Guidance, &hyper, 100 + batch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(batch);
        let rows: Vec<Vec<SigSymbol>> = (0..32)
            .map(|_| (0..m.input_symbols()).map(|_| *SigSymbol::ALL.choose(&mut rng).unwrap()).collect())
            .collect();
        let labels = Array2::from_shape_fn((32, 1), |(r, _)| ((r as u64 + batch) % 2) as f64);
        let analytic = m.loss_and_grads(&rows, &labels).unwrap().1.flatten();
        let n = m.num_params();
        let nudge = |k: usize, delta: f64, m: &mut ModelParams| {
            let mut i = 0;
            m.for_each_param_mut(|p| {
                if i == k {
                    *p += delta;
                }
                i += 1;
            });
        };
        for k in (batch as usize..n).step_by(n / 60) {
            nudge(k, h, &mut m);
            let up = m.loss_and_grads(&rows, &labels).unwrap().0;
            nudge(k, -2.0 * h, &mut m);
            let down = m.loss_and_grads(&rows, &labels).unwrap().0;
            nudge(k, h, &mut m);
            let numeric = (up - down) / (2.0 * h);
            let scale = numeric.abs().max(analytic[k].abs()).max(1e-6);
            worst = worst.max((numeric - analytic[k]).abs() / scale);
            checked += 1;
        }
    }
    ensure(worst < 1e-4, format!("max relative error {worst:.2e} over {checked} parameters"))
}

// ---------------------------------------------------------------------------
// 7: training signal

struct Trained {
    scorer: Arc<Scorer>,
    premise: Arc<ModelParams>,
    metrics: Metrics,
    control: Metrics,
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let config = GenConfig { num_searches: TRAIN_SEARCHES, ..GenConfig::default() };
        let data = build_dataset(&config).unwrap();
        let (params, metrics) = train_classifier(&data.records, &Hyper::guidance(), 0).unwrap();

        let mut shuffled = data.records.clone();
        let mut labels: Vec<Label> = shuffled.iter().map(|r| r.label.clone()).collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
        for (r, l) in shuffled.iter_mut().zip(labels) {
            r.label = l;
        }
        let (_, control) = train_classifier(&shuffled, &Hyper::guidance(), 0).unwrap();

        let premise_data = build_premise_dataset(&config).unwrap();
        let (premise, _) = train_op_classifier(&premise_data.records, &Hyper::premise(), 0).unwrap();
        Trained { scorer: Arc::new(Scorer::new(&params).unwrap()), premise: Arc::new(premise), metrics, control }
    })
}

fn training_signal() -> Check {
    let t = trained();
    let (m, c) = (&t.metrics, &t.control);
    ensure(
        m.validation_accuracy >= 0.70 && m.validation_auc >= 0.80 && c.validation_accuracy <= 0.55,
        format!(
            "accuracy {:.4}, AUC {:.4} on {} records; shuffled-label accuracy {:.4}",
            m.validation_accuracy,
            m.validation_auc,
            m.train_records + m.validation_records,
            c.validation_accuracy
        ),
    )
}

// ---------------------------------------------------------------------------
// 4, 8, 9, 10: one benchmark sweep over every mode

fn sweep() -> &'static BenchReport {
    static CELL: OnceLock<BenchReport> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = trained();
        let cases = load_benchmarks(&benchmarks_dir()).unwrap();
        let settings = BenchSettings {
            max_expressions: BENCH_BUDGET,
            time_budget: None,
            scorer: Some(t.scorer.clone()),
            premise: Some(t.premise.clone()),
            premise_k: 4,
            threads: 1,
        };
        run_bench(&cases, &Mode::ALL, &settings, &|_| {}).unwrap()
    })
}

fn soundness() -> Check {
    let report = sweep();
    let cases = load_benchmarks(&benchmarks_dir()).unwrap();
    let mut violations = report.soundness_violations.clone();
    let mut solved = 0;
    for row in report.rows.iter().filter(|r| r.solved == 1) {
        solved += 1;
        let case = cases.iter().find(|c| c.task.name == row.name).unwrap();
        let ok = parse_formula(&row.formula)
            .ok()
            .and_then(|e| e.eval(&case.task, &EvalLimits::default()).ok())
            .is_some_and(|v| v.data.matches_outputs(&case.task.outputs));
        if !ok {
            violations.push(format!("{} [{}]: {}", row.name, row.mode, row.formula));
        }
    }
    ensure(violations.is_empty(), format!("{solved} solved rows over {} modes, {} violations {violations:?}", Mode::ALL.len(), violations.len()))
}

fn totals(mode: Mode) -> ModeTotals {
    sweep().totals(&[mode]).remove(0)
}

fn solved_names(mode: Mode) -> HashSet<&'static str> {
    sweep().rows.iter().filter(|r| r.mode == mode && r.solved == 1).map(|r| r.name.as_str()).collect()
}

fn guidance_effect() -> Check {
    let (base, guided) = (solved_names(Mode::None), solved_names(Mode::Model));
    let gained = guided.difference(&base).count();
    let lost: Vec<_> = base.difference(&guided).collect();
    ensure(
        guided.len() >= base.len() + 2 && lost.len() <= 1,
        format!("unguided {} / model {} of 56, gained {gained}, lost {lost:?}", base.len(), guided.len()),
    )
}

fn score_separation() -> Check {
    let h = sweep().histogram.as_ref().ok_or("no model histogram")?;
    assert_eq!(h.bins(), FINE_BINS);
    let (sub, non) = h.total();
    let (ms, mn) = (h.median(true).unwrap_or(f64::NAN), h.median(false).unwrap_or(f64::NAN));
    ensure(ms >= 0.6 && mn <= 0.4, format!("sub-expression median {ms:.4} (n={sub}), other median {mn:.4} (n={non})"))
}

fn overhead() -> Check {
    let (none, model) = (totals(Mode::None), totals(Mode::Model));
    let ratio = model.expressions_per_second / none.expressions_per_second;
    ensure(
        ratio >= 0.5 && none.expressions_per_second >= 100_000.0,
        format!(
            "unguided {:.0}/s, model {:.0}/s, ratio {ratio:.2}",
            none.expressions_per_second, model.expressions_per_second
        ),
    )
}

// ---------------------------------------------------------------------------
// 11: repeated CLI runs

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sheetsynth"))
        .args(args)
        .env_remove("BUSTLE_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_default()
}

/// results.csv with the wall-clock column dropped.
fn results_without_seconds(p: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    let headers = r.headers().unwrap().clone();
    let seconds = headers.iter().position(|h| h == "seconds").unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().enumerate().filter(|(i, _)| *i != seconds).map(|(_, f)| f.to_string()).collect())
        .collect()
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let s = |p: PathBuf| p.to_str().unwrap().to_string();
    let bench = s(benchmarks_dir());
    for run in ["a", "b"] {
        let data = s(p(&format!("data_{run}.jsonl")));
        let model = s(p(&format!("model_{run}.json")));
        let metrics = s(p(&format!("metrics_{run}.json")));
        let out = s(p(&format!("bench_{run}")));
        cli(&["gen-data", "--out", &data, "--searches", "20", "--budget", "20000", "--seed", "7"])?;
        cli(&["train", "--data", &data, "--out", &model, "--metrics", &metrics, "--epochs", "2", "--seed", "7"])?;
        cli(&[
            "bench", "--benchmarks", &bench, "--modes", "none,heuristic,model", "--model", &model,
            "--max-expressions", "200000", "--out", &out, "--quiet",
        ])?;
    }
    let same = |a: &str, b: &str| {
        let (a, b) = (read(&p(a)), read(&p(b)));
        !a.is_empty() && a == b
    };
    let data = same("data_a.jsonl", "data_b.jsonl");
    let model = same("model_a.json", "model_b.json");
    let metrics = same("metrics_a.json", "metrics_b.json");
    let results = results_without_seconds(&p("bench_a/results.csv")) == results_without_seconds(&p("bench_b/results.csv"));
    ensure(
        data && model && metrics && results,
        format!("dataset {data}, weights {model}, metrics {metrics}, results.csv {results}"),
    )
}

// ---------------------------------------------------------------------------

struct Criterion {
    id: u8,
    title: &'static str,
    limit: Duration,
    check: fn() -> Check,
}

fn main() -> ExitCode {
    let mins = |m: u64| Duration::from_secs(60 * m);
    let criteria = [
        Criterion { id: 1, title: "property signature golden", limit: Duration::from_secs(1), check: signature_golden },
        Criterion { id: 2, title: "probability binning table", limit: Duration::from_secs(1), check: binning_table },
        Criterion { id: 3, title: "enumeration completeness", limit: Duration::from_secs(10), check: enumeration_completeness },
        Criterion { id: 5, title: "showcase tasks, unguided, 1M", limit: Duration::from_secs(60), check: showcase_tasks_unguided },
        Criterion { id: 6, title: "gradient check", limit: Duration::from_secs(30), check: gradient_check },
        Criterion { id: 7, title: "training signal", limit: mins(15), check: training_signal },
        Criterion { id: 4, title: "soundness over all modes", limit: mins(30), check: soundness },
        Criterion { id: 8, title: "guidance effectiveness", limit: mins(30), check: guidance_effect },
        Criterion { id: 9, title: "model score separation", limit: mins(30), check: score_separation },
        Criterion { id: 10, title: "guidance overhead", limit: mins(30), check: overhead },
        Criterion { id: 11, title: "determinism", limit: mins(30), check: determinism },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > c.limit => Err(format!("{d}; took {elapsed:.1?}, limit {:?}", c.limit)),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{:>2}] {:<32} {detail} ({:.1}s)", c.id, c.title, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
