use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sheetsynth::dsl::{parse_formula, EvalLimits, ParseError, Task, TaskError, TaskFile};
use sheetsynth::model::{ModelParams, Scorer};
use sheetsynth::search::{synthesize, Guidance, PremiseFilter, SearchConfig, SearchError};

/// Tag marking the three showcase cases (date, path depth, acronym).
pub const SHOWCASE_TAG: &str = "showcase";

#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub task: Task,
    pub reference: Option<String>,
    pub showcase: bool,
    /// True when the reference parses in the DSL and was checked against
    /// the examples.
    pub reference_checked: bool,
    pub path: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Task { path: PathBuf, source: TaskError },
    #[error("{path}: reference formula is malformed: {source}")]
    Reference { path: PathBuf, source: ParseError },
    #[error("{path}: reference formula does not reproduce the outputs ({detail})")]
    Validation { path: PathBuf, detail: String },
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no benchmark files in {0}")]
    Empty(PathBuf),
}

/// Loads every `*.json` task in `dir`, sorted by file name. References
/// written in the DSL must reproduce the outputs; references that use
/// functions outside the DSL are kept as documentation.
pub fn load_benchmarks(dir: &Path) -> Result<Vec<BenchmarkCase>, BenchError> {
    let io = |source| BenchError::Io { path: dir.to_path_buf(), source };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(BenchError::Empty(dir.to_path_buf()));
    }
    paths.into_iter().map(|p| load_case(&p)).collect()
}

pub fn load_case(path: &Path) -> Result<BenchmarkCase, BenchError> {
    let task_err = |source| BenchError::Task { path: path.to_path_buf(), source };
    let file = TaskFile::load(path).map_err(task_err)?;
    let task = file.to_task().map_err(task_err)?;
    let mut reference_checked = false;
    if let Some(reference) = &file.reference {
        match parse_formula(reference) {
            Ok(expr) => {
                let detail = match expr.eval(&task, &EvalLimits::default()) {
                    Ok(v) if v.data.matches_outputs(&task.outputs) => None,
                    Ok(v) => Some(format!("got {:?}", v.data.rows_display())),
                    Err(e) => Some(e.to_string()),
                };
                if let Some(detail) = detail {
                    return Err(BenchError::Validation { path: path.to_path_buf(), detail });
                }
                reference_checked = true;
            }
            Err(ParseError::UnknownFunction { .. }) => {}
            Err(source) => return Err(BenchError::Reference { path: path.to_path_buf(), source }),
        }
    }
    Ok(BenchmarkCase {
        task,
        reference: file.reference,
        showcase: file.tags.iter().any(|t| t == SHOWCASE_TAG),
        reference_checked,
        path: path.to_path_buf(),
    })
}

/// One search configuration compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    None,
    Heuristic,
    Premise,
    Model,
    Combined,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::None, Mode::Heuristic, Mode::Premise, Mode::Model, Mode::Combined];

    pub fn name(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::Heuristic => "heuristic",
            Mode::Premise => "premise",
            Mode::Model => "model",
            Mode::Combined => "combined",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Mode::Model | Mode::Combined)
    }

    pub fn needs_premise(self) -> bool {
        self == Mode::Premise
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s:?}; expected one of none, heuristic, premise, model, combined"))
    }
}

#[derive(Debug, Clone)]
pub struct BenchSettings {
    pub max_expressions: u64,
    pub time_budget: Option<Duration>,
    pub scorer: Option<Arc<Scorer>>,
    pub premise: Option<Arc<ModelParams>>,
    pub premise_k: usize,
    /// Worker threads; 1 runs everything on the calling thread.
    pub threads: usize,
}

impl Default for BenchSettings {
    fn default() -> BenchSettings {
        BenchSettings {
            max_expressions: 1_000_000,
            time_budget: None,
            scorer: None,
            premise: None,
            premise_k: 4,
            threads: 1,
        }
    }
}

impl BenchSettings {
    pub fn search_config(&self, mode: Mode) -> Result<SearchConfig, String> {
        let missing = |what: &str| format!("mode {mode} needs a {what} model");
        let guidance = match mode {
            Mode::None | Mode::Premise => Guidance::None,
            Mode::Heuristic => Guidance::Heuristic,
            Mode::Model => Guidance::Model(self.scorer.clone().ok_or_else(|| missing("guidance"))?),
            Mode::Combined => Guidance::Combined(self.scorer.clone().ok_or_else(|| missing("guidance"))?),
        };
        let premise = if mode.needs_premise() {
            let params = self.premise.clone().ok_or_else(|| missing("premise"))?;
            Some(PremiseFilter { params, k: self.premise_k })
        } else {
            None
        };
        Ok(SearchConfig {
            max_expressions: self.max_expressions,
            time_budget: self.time_budget,
            guidance,
            premise,
            record_scores: mode == Mode::Model,
            ..SearchConfig::default()
        })
    }
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub name: String,
    pub mode: Mode,
    pub solved: u8,
    pub expressions: u64,
    pub seconds: f64,
    pub solve_weight: Option<u32>,
    pub formula: String,
}

/// Model scores of values stored during solved searches, split by whether
/// the value is part of the returned solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub subexpr: Vec<u64>,
    pub non_subexpr: Vec<u64>,
}

impl ScoreHistogram {
    pub fn new(bins: usize) -> ScoreHistogram {
        ScoreHistogram {
            subexpr: vec![0; bins],
            non_subexpr: vec![0; bins],
        }
    }

    pub fn bins(&self) -> usize {
        self.subexpr.len()
    }

    fn bin(&self, score: f64) -> usize {
        ((score.clamp(0.0, 1.0) * self.bins() as f64) as usize).min(self.bins() - 1)
    }

    pub fn add(&mut self, score: f64, in_solution: bool) {
        let b = self.bin(score);
        if in_solution {
            self.subexpr[b] += 1;
        } else {
            self.non_subexpr[b] += 1;
        }
    }

    pub fn merge(&mut self, other: &ScoreHistogram) {
        for (a, b) in self.subexpr.iter_mut().zip(&other.subexpr) {
            *a += b;
        }
        for (a, b) in self.non_subexpr.iter_mut().zip(&other.non_subexpr) {
            *a += b;
        }
    }

    /// Sums groups of adjacent bins; `bins` must divide the current count.
    pub fn coarsen(&self, bins: usize) -> ScoreHistogram {
        let group = self.bins() / bins;
        let fold = |v: &[u64]| v.chunks(group).map(|c| c.iter().sum()).collect();
        ScoreHistogram {
            subexpr: fold(&self.subexpr),
            non_subexpr: fold(&self.non_subexpr),
        }
    }

    pub fn total(&self) -> (u64, u64) {
        (self.subexpr.iter().sum(), self.non_subexpr.iter().sum())
    }

    /// Median score of one group, taken as the midpoint of the bin holding
    /// the middle element.
    pub fn median(&self, subexpr: bool) -> Option<f64> {
        let counts = if subexpr { &self.subexpr } else { &self.non_subexpr };
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return None;
        }
        let half = total.div_ceil(2);
        let mut acc = 0;
        for (i, c) in counts.iter().enumerate() {
            acc += c;
            if acc >= half {
                return Some((i as f64 + 0.5) / self.bins() as f64);
            }
        }
        None
    }
}

/// Resolution of the histogram the harness accumulates.
pub const FINE_BINS: usize = 1000;

/// Bins in the reported histogram.
pub const REPORT_BINS: usize = 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeTotals {
    pub mode: Mode,
    pub solved: usize,
    pub expressions: u64,
    pub seconds: f64,
    pub expressions_per_second: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    /// Ordered by case, then by the order modes were requested.
    pub rows: Vec<BenchRow>,
    pub histogram: Option<ScoreHistogram>,
    /// Solved rows whose formula failed re-verification.
    pub soundness_violations: Vec<String>,
}

impl BenchReport {
    pub fn totals(&self, modes: &[Mode]) -> Vec<ModeTotals> {
        modes
            .iter()
            .map(|&mode| {
                let rows: Vec<&BenchRow> = self.rows.iter().filter(|r| r.mode == mode).collect();
                let expressions: u64 = rows.iter().map(|r| r.expressions).sum();
                let seconds: f64 = rows.iter().map(|r| r.seconds).sum();
                ModeTotals {
                    mode,
                    solved: rows.iter().filter(|r| r.solved == 1).count(),
                    expressions,
                    seconds,
                    expressions_per_second: if seconds > 0.0 { expressions as f64 / seconds } else { 0.0 },
                }
            })
            .collect()
    }
}

struct JobOutput {
    row: BenchRow,
    histogram: Option<ScoreHistogram>,
    violation: bool,
}

fn run_job(case: &BenchmarkCase, mode: Mode, config: &SearchConfig) -> Result<JobOutput, SearchError> {
    let result = synthesize(&case.task, config)?;
    let formula = result.formula.clone().unwrap_or_default();
    let violation = result.solved
        && !parse_formula(&formula)
            .ok()
            .and_then(|e| e.eval(&case.task, &config.limits).ok())
            .is_some_and(|v| v.data.matches_outputs(&case.task.outputs));
    let histogram = (result.solved && mode == Mode::Model).then(|| {
        let mut h = ScoreHistogram::new(FINE_BINS);
        for s in &result.scores {
            h.add(s.score, s.in_solution);
        }
        h
    });
    Ok(JobOutput {
        row: BenchRow {
            name: case.task.name.clone(),
            mode,
            solved: u8::from(result.solved && !violation),
            expressions: result.expressions_considered,
            seconds: (result.elapsed.as_secs_f64() * 1e6).round() / 1e6,
            solve_weight: result.solve_weight,
            formula,
        },
        histogram,
        violation,
    })
}

/// Runs every case under every mode. Each search is single-threaded;
/// with `threads > 1` independent searches run side by side.
pub fn run_bench(
    cases: &[BenchmarkCase],
    modes: &[Mode],
    settings: &BenchSettings,
    progress: &(dyn Fn(&BenchRow) + Sync),
) -> Result<BenchReport, String> {
    let configs: Vec<SearchConfig> = modes.iter().map(|&m| settings.search_config(m)).collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..cases.len()).flat_map(|c| (0..modes.len()).map(move |m| (c, m))).collect();
    let run = |&(c, m): &(usize, usize)| -> Result<JobOutput, String> {
        let out = run_job(&cases[c], modes[m], &configs[m]).map_err(|e| format!("{}: {e}", cases[c].task.name))?;
        progress(&out.row);
        Ok(out)
    };
    let outputs: Vec<JobOutput> = if settings.threads > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(settings.threads)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| jobs.par_iter().map(run).collect::<Result<_, _>>())?
    } else {
        jobs.iter().map(run).collect::<Result<_, _>>()?
    };

    let mut histogram = modes.contains(&Mode::Model).then(|| ScoreHistogram::new(FINE_BINS));
    let mut rows = Vec::with_capacity(outputs.len());
    let mut soundness_violations = Vec::new();
    for out in outputs {
        if let (Some(total), Some(h)) = (histogram.as_mut(), &out.histogram) {
            total.merge(h);
        }
        if out.violation {
            soundness_violations.push(format!("{} [{}]: {}", out.row.name, out.row.mode, out.row.formula));
        }
        rows.push(out.row);
    }
    Ok(BenchReport { rows, histogram, soundness_violations })
}
