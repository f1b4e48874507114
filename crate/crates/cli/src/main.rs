use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use sheetsynth::datagen::{build_dataset, build_premise_dataset, read_dataset, write_dataset, GenConfig};
use sheetsynth::dsl::{parse_formula, EvalLimits, TaskFile};
use sheetsynth::model::{load_params, save_params, train_classifier, train_op_classifier, Hyper, ModelKind, ModelParams, Scorer};
use sheetsynth::search::{synthesize, Guidance, PremiseFilter, SearchConfig};
use sheetsynth_cli::bench::{load_benchmarks, run_bench, BenchSettings, Mode, REPORT_BINS};
use sheetsynth_cli::report::{read_histogram_csv, read_results, write_curves, write_histogram, write_results};

const EXIT_USAGE: u8 = 1;
const EXIT_UNSOLVED: u8 = 2;

#[derive(Parser)]
#[command(name = "sheetsynth", version, about = "Synthesize spreadsheet formulas from input/output examples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Guidance,
    Premise,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> ModelKind {
        match k {
            KindArg::Guidance => ModelKind::Guidance,
            KindArg::Premise => ModelKind::Premise,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GuidanceArg {
    None,
    Model,
    Heuristic,
    Combined,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a training dataset from dummy-output searches.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        searches: usize,
        /// Expressions per search.
        #[arg(long, default_value_t = 50_000)]
        budget: u64,
        #[arg(long, env = "BUSTLE_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "guidance")]
        kind: KindArg,
        #[arg(long, default_value_t = 100)]
        positives: usize,
        #[arg(long, default_value_t = 100)]
        negatives: usize,
    },
    /// Train a model on a generated dataset and save its weights.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "BUSTLE_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, value_enum, default_value = "guidance")]
        kind: KindArg,
        /// Also write the metrics as JSON here.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Search for a formula matching one task file.
    Synthesize {
        #[arg(long)]
        task: PathBuf,
        #[arg(long, value_enum, default_value = "none")]
        guidance: GuidanceArg,
        /// Guidance model weights, required for model and combined guidance.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Premise model weights; enables operation filtering.
        #[arg(long)]
        premise: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        premise_k: usize,
        #[arg(long)]
        max_expressions: Option<u64>,
        #[arg(long)]
        max_seconds: Option<f64>,
        #[arg(long, default_value_t = 20)]
        max_weight: u32,
        /// Use the 10M expression / 30s budget.
        #[arg(long)]
        paper_scale: bool,
        /// Accepted for symmetry with the other commands; search is deterministic.
        #[arg(long, env = "BUSTLE_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Run the benchmark suite under several modes and write reports.
    Bench {
        #[arg(long, default_value = "benchmarks")]
        benchmarks: PathBuf,
        /// Comma-separated: none, heuristic, premise, model, combined.
        #[arg(long, value_delimiter = ',', default_value = "none,model")]
        modes: Vec<Mode>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        premise: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        premise_k: usize,
        #[arg(long)]
        max_expressions: Option<u64>,
        #[arg(long)]
        max_seconds: Option<f64>,
        #[arg(long)]
        paper_scale: bool,
        /// Number of searches to run at once.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        #[arg(long, env = "BUSTLE_SEED", default_value_t = 0)]
        seed: u64,
        /// Suppress per-case progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Redraw plots from an existing results.csv.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Defaults to the directory holding the results file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Evaluate a formula on a task's inputs and print one output per row.
    Eval {
        #[arg(long)]
        formula: String,
        #[arg(long)]
        task: PathBuf,
    },
}

/// An error that should exit with the usage code rather than a failure.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(Usage(msg.into()).into())
}

fn load_kind(path: &Path, kind: ModelKind) -> anyhow::Result<ModelParams> {
    let params = load_params(path).with_context(|| format!("loading {}", path.display()))?;
    if params.kind != kind {
        bail!("{} holds a {:?} model, expected {:?}", path.display(), params.kind, kind);
    }
    Ok(params)
}

fn budgets(max_expressions: Option<u64>, max_seconds: Option<f64>, paper_scale: bool) -> anyhow::Result<(u64, Option<Duration>)> {
    let base = if paper_scale { SearchConfig::paper_scale() } else { SearchConfig::default() };
    let time = match max_seconds {
        Some(s) if !(s > 0.0 && s.is_finite()) => return usage("--max-seconds must be positive"),
        Some(s) => Some(Duration::from_secs_f64(s)),
        None => base.time_budget,
    };
    let exprs = max_expressions.unwrap_or(base.max_expressions);
    if exprs == 0 {
        return usage("--max-expressions must be positive");
    }
    Ok((exprs, time))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenData { out, searches, budget, seed, kind, positives, negatives } => {
            let config = GenConfig {
                num_searches: searches,
                positives_per_search: positives,
                negatives_per_search: negatives,
                search_budget: budget,
                seed,
                ..GenConfig::default()
            };
            if let Err(e) = config.validate() {
                return usage(e.to_string());
            }
            let dataset = match ModelKind::from(kind) {
                ModelKind::Guidance => build_dataset(&config)?,
                ModelKind::Premise => build_premise_dataset(&config)?,
            };
            write_dataset(&dataset, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", serde_json::to_string_pretty(&dataset.stats)?);
        }
        Command::Train { data, out, seed, epochs, kind, metrics } => {
            if epochs == 0 {
                return usage("--epochs must be at least 1");
            }
            let kind = ModelKind::from(kind);
            let (_, records) = read_dataset(&data).with_context(|| format!("reading {}", data.display()))?;
            if let Some(r) = records.iter().find(|r| r.kind() != kind) {
                bail!("dataset holds {:?} records but --kind is {:?}", r.kind(), kind);
            }
            let hyper = Hyper { epochs, ..Hyper::for_kind(kind) };
            let (params, m) = match kind {
                ModelKind::Guidance => train_classifier(&records, &hyper, seed)?,
                ModelKind::Premise => train_op_classifier(&records, &hyper, seed)?,
            };
            save_params(&params, &out).with_context(|| format!("writing {}", out.display()))?;
            let text = serde_json::to_string_pretty(&m)?;
            if let Some(path) = metrics {
                std::fs::write(&path, format!("{text}\n"))?;
            }
            println!("{text}");
        }
        Command::Synthesize {
            task,
            guidance,
            model,
            premise,
            premise_k,
            max_expressions,
            max_seconds,
            max_weight,
            paper_scale,
            seed: _,
        } => {
            let needs_model = matches!(guidance, GuidanceArg::Model | GuidanceArg::Combined);
            if needs_model && model.is_none() {
                return usage("--guidance model and combined need --model PATH");
            }
            if max_weight == 0 {
                return usage("--max-weight must be positive");
            }
            let (max_expressions, time_budget) = budgets(max_expressions, max_seconds, paper_scale)?;
            let task = TaskFile::load(&task)
                .and_then(|f| f.to_task())
                .with_context(|| format!("reading {}", task.display()))?;
            let scorer = match &model {
                Some(p) if needs_model => Some(Arc::new(Scorer::new(&load_kind(p, ModelKind::Guidance)?)?)),
                _ => None,
            };
            let guidance = match (guidance, scorer) {
                (GuidanceArg::Model, Some(s)) => Guidance::Model(s),
                (GuidanceArg::Combined, Some(s)) => Guidance::Combined(s),
                (GuidanceArg::Heuristic, _) => Guidance::Heuristic,
                _ => Guidance::None,
            };
            let premise = match premise {
                Some(p) => Some(PremiseFilter { params: Arc::new(load_kind(&p, ModelKind::Premise)?), k: premise_k }),
                None => None,
            };
            let config = SearchConfig { max_expressions, time_budget, max_weight, guidance, premise, ..SearchConfig::default() };
            let r = synthesize(&task, &config).map_err(|e| Usage(e.to_string()))?;
            println!("{}", r.formula.as_deref().unwrap_or("UNSOLVED"));
            println!("expressions: {}", r.expressions_considered);
            println!("elapsed: {:.3}s", r.elapsed.as_secs_f64());
            if !r.solved {
                return Ok(ExitCode::from(EXIT_UNSOLVED));
            }
        }
        Command::Bench {
            benchmarks,
            modes,
            model,
            premise,
            premise_k,
            max_expressions,
            max_seconds,
            paper_scale,
            parallel,
            out,
            seed,
            quiet,
        } => {
            if modes.is_empty() {
                return usage("--modes must name at least one mode");
            }
            if modes.iter().any(|m| m.needs_model()) && model.is_none() {
                return usage("model and combined modes need --model PATH");
            }
            if modes.iter().any(|m| m.needs_premise()) && premise.is_none() {
                return usage("premise mode needs --premise PATH");
            }
            let (max_expressions, time_budget) = budgets(max_expressions, max_seconds, paper_scale)?;
            let cases = load_benchmarks(&benchmarks)?;
            let settings = BenchSettings {
                max_expressions,
                time_budget,
                scorer: match &model {
                    Some(p) => Some(Arc::new(Scorer::new(&load_kind(p, ModelKind::Guidance)?)?)),
                    None => None,
                },
                premise: match &premise {
                    Some(p) => Some(Arc::new(load_kind(p, ModelKind::Premise)?)),
                    None => None,
                },
                premise_k,
                threads: parallel.max(1),
            };
            let progress = |row: &sheetsynth_cli::bench::BenchRow| {
                if !quiet {
                    eprintln!(
                        "{:<60} {:<9} {} {:>9} {}",
                        row.name,
                        row.mode.name(),
                        if row.solved == 1 { "solved  " } else { "unsolved" },
                        row.expressions,
                        row.formula
                    );
                }
            };
            let report = run_bench(&cases, &modes, &settings, &progress).map_err(anyhow::Error::msg)?;
            std::fs::create_dir_all(&out)?;
            write_results(&out.join("results.csv"), &report.rows)?;
            write_curves(&out, &report.rows)?;
            let totals = report.totals(&modes);
            let mut summary = json!({
                "cases": cases.len(),
                "modes": modes,
                "maxExpressions": max_expressions,
                "maxSeconds": time_budget.map(|t| t.as_secs_f64()),
                "premiseK": premise_k,
                "seed": seed,
                "totals": totals,
                "soundnessViolations": report.soundness_violations,
            });
            if let Some(h) = &report.histogram {
                write_histogram(&out, &h.coarsen(REPORT_BINS))?;
                let (sub, non) = h.total();
                summary["scores"] = json!({
                    "subexprCount": sub,
                    "nonSubexprCount": non,
                    "subexprMedian": h.median(true),
                    "nonSubexprMedian": h.median(false),
                });
            }
            std::fs::write(out.join("summary.json"), format!("{}\n", serde_json::to_string_pretty(&summary)?))?;
            for t in &totals {
                println!(
                    "{:<10} solved {:>2}/{}  {:>12} expressions  {:>8.1}s  {:>10.0} expr/s",
                    t.mode.name(),
                    t.solved,
                    cases.len(),
                    t.expressions,
                    t.seconds,
                    t.expressions_per_second
                );
            }
            if !report.soundness_violations.is_empty() {
                bail!("{} solved rows failed re-verification", report.soundness_violations.len());
            }
        }
        Command::Report { results, out, histogram } => {
            let rows = read_results(&results).with_context(|| format!("reading {}", results.display()))?;
            let out = out.unwrap_or_else(|| results.parent().map(Path::to_path_buf).unwrap_or_default());
            std::fs::create_dir_all(&out)?;
            write_curves(&out, &rows)?;
            if let Some(path) = histogram {
                let h = read_histogram_csv(&std::fs::read_to_string(&path)?)?;
                std::fs::write(out.join("histogram.svg"), sheetsynth_cli::report::histogram_svg(&h))?;
            }
        }
        Command::Eval { formula, task } => {
            let expr = parse_formula(&formula).map_err(|e| Usage(e.to_string()))?;
            let file = TaskFile::load(&task).with_context(|| format!("reading {}", task.display()))?;
            let task = file.to_task()?;
            let value = expr.eval(&task, &EvalLimits::default())?;
            println!("{}", serde_json::to_string(&value.data.rows_display())?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
