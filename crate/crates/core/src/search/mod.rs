//! Weight-ordered bottom-up enumeration over values, with optional
//! reweighting of each new value by a learned or hand-written score.

mod bank;
mod constants;
mod guide;

pub use bank::ValueBank;
pub use constants::{extract_constants, mined_constants, INT_CONSTANTS, MAX_MINED_LENGTH, STRING_CONSTANTS};
pub use guide::{
    bin_probability, heuristic_score, premise_filter, reweighted, Guidance, ProbabilityOutOfRange, Reweighter,
    BIN_BOUNDS, MAX_PENALTY,
};

use std::collections::HashSet;
use std::sync::Arc;
use std::time::Duration;

use hashbrown::HashTable;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use web_time::Instant;

use crate::dsl::{apply_rows, parse_formula, EvalLimits, Leaf, Op, Provenance, Task, Value, ValueData, NUM_OPS};
use crate::model::{ModelError, ModelParams};
use crate::sigs::io_signature;

/// How often, in attempts, the clock is read.
const CLOCK_STRIDE: u64 = 4096;

#[derive(Debug, Clone)]
pub struct PremiseFilter {
    pub params: Arc<ModelParams>,
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Every operation application counts, including ones that fail.
    pub max_expressions: u64,
    pub max_weight: u32,
    pub time_budget: Option<Duration>,
    pub limits: EvalLimits,
    pub guidance: Guidance,
    pub premise: Option<PremiseFilter>,
    /// Restricts the operation table; `None` uses every operation.
    pub ops: Option<Vec<Op>>,
    /// Mine string constants from the outputs in addition to the fixed set.
    pub mine_constants: bool,
    /// Keep each reweighted value's probability for later analysis.
    pub record_scores: bool,
    /// New values reweighted together in one model call.
    pub batch_size: usize,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        SearchConfig {
            max_expressions: 1_000_000,
            max_weight: 20,
            time_budget: None,
            limits: EvalLimits::default(),
            guidance: Guidance::None,
            premise: None,
            ops: None,
            mine_constants: true,
            record_scores: false,
            batch_size: 1024,
        }
    }
}

impl SearchConfig {
    pub fn paper_scale() -> SearchConfig {
        SearchConfig {
            max_expressions: 10_000_000,
            time_budget: Some(Duration::from_secs(30)),
            ..SearchConfig::default()
        }
    }

    fn validate(&self) -> Result<(), SearchError> {
        if self.max_expressions == 0 || self.max_weight == 0 || self.batch_size == 0 {
            return Err(SearchError::Config("budgets must be positive".into()));
        }
        if self.time_budget.is_some_and(|t| t.is_zero()) {
            return Err(SearchError::Config("time budget must be positive".into()));
        }
        if let Some(p) = &self.premise {
            if p.k >= NUM_OPS {
                return Err(SearchError::Config(format!("premise k must be below {NUM_OPS}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Solved,
    ExpressionBudget,
    WeightBudget,
    TimeBudget,
}

/// A value's reweighting probability and whether it turned out to be part
/// of the returned solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredValue {
    pub score: f64,
    pub in_solution: bool,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub solved: bool,
    pub formula: Option<String>,
    pub expressions_considered: u64,
    pub values_stored: usize,
    pub elapsed: Duration,
    pub termination: Termination,
    /// Enumeration weight at which the solution was generated.
    pub solve_weight: Option<u32>,
    /// Filled only for solved searches with `record_scores` set.
    pub scores: Vec<ScoredValue>,
}

/// Reported after each weight level finishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub weight: u32,
    pub values_stored: usize,
    pub expressions_considered: u64,
}

pub fn synthesize(task: &Task, config: &SearchConfig) -> Result<SearchResult, SearchError> {
    synthesize_with(task, config, &mut |_| {}).map(|(r, _)| r)
}

/// Runs the search and also hands back the final value bank.
pub fn synthesize_with(
    task: &Task,
    config: &SearchConfig,
    progress: &mut dyn FnMut(&Progress),
) -> Result<(SearchResult, ValueBank), SearchError> {
    config.validate()?;
    let sio = io_signature(task);
    let mut ops: Vec<Op> = config.ops.clone().unwrap_or_else(|| Op::ALL.to_vec());
    if let Some(p) = &config.premise {
        let allowed = premise_filter(task, &p.params, p.k)?;
        ops.retain(|op| allowed.contains(op));
    }
    let reweighter = Reweighter::new(&config.guidance, task, &sio)?;
    let mut search = Search {
        task,
        config,
        reweighter,
        bank: ValueBank::new(),
        staged: Staging::default(),
        scores: Vec::new(),
        considered: 0,
        start: Instant::now(),
    };
    let outcome = search.run(&ops, progress);
    let Search { bank, considered, start, scores, .. } = search;
    let (termination, solution) = match outcome {
        Outcome::Solved(v, w) => (Termination::Solved, Some((v, w))),
        Outcome::Stopped(t) => (t, None),
    };
    let mut result = SearchResult {
        solved: solution.is_some(),
        formula: None,
        expressions_considered: considered,
        values_stored: bank.len(),
        elapsed: start.elapsed(),
        termination,
        solve_weight: None,
        scores: Vec::new(),
    };
    if let Some((value, w)) = solution {
        let formula = value.render();
        verify(task, &formula, &config.limits);
        if config.record_scores {
            let parts = subexpression_rows(&value);
            result.scores = scores
                .iter()
                .map(|&(id, p)| ScoredValue {
                    score: f64::from(p),
                    in_solution: parts.contains(&bank.get(id).data),
                })
                .collect();
        }
        result.formula = Some(formula);
        result.solve_weight = Some(w);
    }
    Ok((result, bank))
}

/// Re-evaluates a rendered solution from its text.
fn verify(task: &Task, formula: &str, limits: &EvalLimits) {
    let ok = parse_formula(formula)
        .ok()
        .and_then(|e| e.eval(task, limits).ok())
        .is_some_and(|v| v.data.matches_outputs(&task.outputs));
    assert!(ok, "search produced an invalid solution {formula}");
}

/// Rows of every proper non-leaf sub-expression of `value`.
fn subexpression_rows(value: &Value) -> HashSet<ValueData> {
    fn walk(v: &Value, out: &mut HashSet<ValueData>) {
        if let Provenance::Node(_, args) = &v.provenance {
            for a in args {
                if matches!(a.provenance, Provenance::Node(..)) {
                    out.insert(a.data.clone());
                }
                walk(a, out);
            }
        }
    }
    let mut out = HashSet::new();
    walk(value, &mut out);
    out
}

enum Outcome {
    Solved(Value, u32),
    Stopped(Termination),
}

struct Staged {
    data: ValueData,
    hash: u64,
    op: Op,
    args: [u32; 4],
}

/// New values from the current batch, deduplicated among themselves.
#[derive(Default)]
struct Staging {
    items: Vec<Staged>,
    table: HashTable<u32>,
}

impl Staging {
    fn contains(&self, hash: u64, data: &ValueData) -> bool {
        self.table.find(hash, |&i| self.items[i as usize].data == *data).is_some()
    }

    fn push(&mut self, item: Staged) {
        let i = self.items.len() as u32;
        let Staging { items, table } = self;
        table.insert_unique(item.hash, i, |&j| items[j as usize].hash);
        items.push(item);
    }

    fn len(&self) -> usize {
        self.items.len()
    }
}

struct Search<'a> {
    task: &'a Task,
    config: &'a SearchConfig,
    reweighter: Reweighter<'a>,
    bank: ValueBank,
    staged: Staging,
    scores: Vec<(u32, f32)>,
    considered: u64,
    start: Instant,
}

/// All ways to write `total` as an ordered sum of `parts` positive
/// integers, each at most `cap`, in lexicographic order.
pub fn compositions(total: u32, parts: usize, cap: u32) -> Vec<Vec<u32>> {
    fn rec(left: u32, parts: usize, cap: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            if (1..=cap).contains(&left) {
                cur.push(left);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        let max_here = cap.min(left.saturating_sub(parts as u32 - 1));
        for first in 1..=max_here {
            cur.push(first);
            rec(left - first, parts - 1, cap, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, cap, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

impl Search<'_> {
    fn seed(&mut self) -> Option<Value> {
        let mut seeds: Vec<Value> = (0..self.task.num_inputs())
            .map(|k| Value::leaf(Leaf::Var(k), self.task.input_data(k)))
            .collect();
        seeds.extend(extract_constants(self.task, self.config.mine_constants));
        for v in seeds {
            if v.data.matches_outputs(&self.task.outputs) {
                return Some(v);
            }
            self.bank.insert(v);
        }
        None
    }

    fn out_of_time(&self) -> bool {
        self.config.time_budget.is_some_and(|t| self.start.elapsed() >= t)
    }

    fn run(&mut self, ops: &[Op], progress: &mut dyn FnMut(&Progress)) -> Outcome {
        if let Some(v) = self.seed() {
            return Outcome::Solved(v, 1);
        }
        let mut lists: [Vec<u32>; 4] = Default::default();
        for w in 2..=self.config.max_weight {
            for &op in ops {
                let desc = op.descriptor();
                let n = desc.arity();
                if (w as usize) < n + 1 {
                    continue;
                }
                for comp in compositions(w - 1, n, w - 1) {
                    let mut empty = false;
                    for i in 0..n {
                        lists[i].clear();
                        lists[i].extend_from_slice(self.bank.ids(comp[i], desc.arg_kinds[i]));
                        empty |= lists[i].is_empty();
                    }
                    if empty {
                        continue;
                    }
                    if let Some(outcome) = self.enumerate(op, &lists[..n], w) {
                        return outcome;
                    }
                    self.flush(w);
                }
            }
            self.flush(w);
            progress(&Progress {
                weight: w,
                values_stored: self.bank.len(),
                expressions_considered: self.considered,
            });
        }
        Outcome::Stopped(Termination::WeightBudget)
    }

    /// Applies `op` to every tuple drawn from `lists`, first list outermost.
    fn enumerate(&mut self, op: Op, lists: &[Vec<u32>], w: u32) -> Option<Outcome> {
        let n = lists.len();
        let mut idx = [0usize; 4];
        loop {
            if self.considered >= self.config.max_expressions {
                self.flush(w);
                return Some(Outcome::Stopped(Termination::ExpressionBudget));
            }
            if self.considered.is_multiple_of(CLOCK_STRIDE) && self.considered > 0 && self.out_of_time() {
                self.flush(w);
                return Some(Outcome::Stopped(Termination::TimeBudget));
            }
            self.considered += 1;

            let mut ids = [0u32; 4];
            for i in 0..n {
                ids[i] = lists[i][idx[i]];
            }
            if let Some(v) = self.attempt(op, &ids[..n], w) {
                return Some(Outcome::Solved(v, w));
            }
            if self.staged.len() >= self.config.batch_size {
                self.flush(w);
            }

            // Advance the odometer, last argument fastest.
            let mut i = n;
            loop {
                if i == 0 {
                    return None;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < lists[i].len() {
                    break;
                }
                idx[i] = 0;
            }
        }
    }

    fn attempt(&mut self, op: Op, ids: &[u32], w: u32) -> Option<Value> {
        let bank = &self.bank;
        let mut args: [&ValueData; 4] = [&bank.get(ids[0]).data; 4];
        for (i, &id) in ids.iter().enumerate() {
            args[i] = &bank.get(id).data;
        }
        let data = apply_rows(op, &args[..ids.len()], &self.config.limits).ok()?;
        if data.matches_outputs(&self.task.outputs) {
            return Some(Value {
                data,
                weight: w,
                provenance: Provenance::Node(op, ids.iter().map(|&id| bank.get(id).clone()).collect()),
            });
        }
        let hash = bank.hash_of(&data);
        if bank.contains_hashed(hash, &data) || self.staged.contains(hash, &data) {
            return None;
        }
        let mut packed = [0u32; 4];
        packed[..ids.len()].copy_from_slice(ids);
        self.staged.push(Staged { data, hash, op, args: packed });
        None
    }

    fn flush(&mut self, w: u32) {
        if self.staged.items.is_empty() {
            return;
        }
        let items = std::mem::take(&mut self.staged.items);
        self.staged.table.clear();
        let weights = {
            let rows: Vec<&ValueData> = items.iter().map(|s| &s.data).collect();
            self.reweighter.reweight(&rows, w)
        };
        for (item, (weight, p)) in items.into_iter().zip(weights) {
            let arity = item.op.arity();
            let args = item.args[..arity].iter().map(|&id| self.bank.get(id).clone()).collect();
            let value = Value {
                data: item.data,
                weight,
                provenance: Provenance::Node(item.op, args),
            };
            let id = self.bank.insert(value).unwrap_or_else(|| unreachable!("staged values are new"));
            if let (true, Some(p)) = (self.config.record_scores, p) {
                self.scores.push((id, p as f32));
            }
        }
    }
}
