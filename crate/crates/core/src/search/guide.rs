use std::sync::Arc;

use hashbrown::HashMap;

use thiserror::Error;

use crate::dsl::{Op, Task, ValueData, NUM_OPS};
use crate::model::{ModelError, ModelKind, ModelParams, Scorer, TaskScorer};
use crate::sigs::{io_signature, OutputInfo, SigSymbol, Signature, VO_SIG_LEN};

/// Upper bounds of the first five probability bins; the sixth bin is
/// `[0.6, 1.0]`.
pub const BIN_BOUNDS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.6];

/// Largest weight penalty a value can receive.
pub const MAX_PENALTY: u32 = 5;

#[derive(Debug, Error, PartialEq)]
#[error("probability {0} is outside [0, 1]")]
pub struct ProbabilityOutOfRange(pub f64);

/// Maps a probability to a bin index in `0..=5`.
pub fn bin_probability(p: f64) -> Result<u32, ProbabilityOutOfRange> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ProbabilityOutOfRange(p));
    }
    Ok(BIN_BOUNDS.iter().take_while(|&&b| p >= b).count() as u32)
}

/// New weight for a value generated at weight `w` with probability `p`.
pub fn reweighted(w: u32, p: f64) -> Result<u32, ProbabilityOutOfRange> {
    Ok(w + MAX_PENALTY - bin_probability(p)?)
}

/// Hand-written relevance score for string values: half substring rate,
/// half normalised edit similarity. `None` for integer values.
pub fn heuristic_score(value: &ValueData, outputs: &[String]) -> Option<f64> {
    let rows = value.as_strs()?;
    let n = rows.len() as f64;
    let mut sub = 0.0;
    let mut dist = 0.0;
    for (v, o) in rows.iter().zip(outputs) {
        if o.contains(v.as_str()) {
            sub += 1.0;
        }
        let longest = v.chars().count().max(o.chars().count()).max(1);
        dist += strsim::levenshtein(v, o) as f64 / longest as f64;
    }
    Some(0.5 * sub / n + 0.5 * (1.0 - dist / n))
}

/// How freshly generated values are reweighted.
#[derive(Debug, Clone, Default)]
pub enum Guidance {
    #[default]
    None,
    Model(Arc<Scorer>),
    Heuristic,
    Combined(Arc<Scorer>),
}

impl Guidance {
    pub fn name(&self) -> &'static str {
        match self {
            Guidance::None => "none",
            Guidance::Model(_) => "model",
            Guidance::Heuristic => "heuristic",
            Guidance::Combined(_) => "combined",
        }
    }

    fn scorer(&self) -> Option<&Scorer> {
        match self {
            Guidance::Model(s) | Guidance::Combined(s) => Some(s),
            _ => None,
        }
    }
}

/// Per-task reweighting state: the task's IO signature is folded into the
/// model once up front.
pub struct Reweighter<'a> {
    guidance: &'a Guidance,
    task_scorer: Option<TaskScorer<'a>>,
    outputs: OutputInfo,
    /// Model scores by packed VO signature. Values vastly outnumber the
    /// distinct signatures they produce.
    cache: HashMap<u128, f64>,
}

const _: () = assert!(2 * VO_SIG_LEN <= 128);

fn pack(symbols: &[SigSymbol]) -> u128 {
    symbols.iter().fold(0, |k, s| (k << 2) | s.index() as u128)
}

fn unpack(key: u128) -> Vec<SigSymbol> {
    (0..VO_SIG_LEN).rev().map(|q| SigSymbol::ALL[((key >> (2 * q)) & 3) as usize]).collect()
}

impl<'a> Reweighter<'a> {
    pub fn new(guidance: &'a Guidance, task: &Task, sio: &Signature) -> Result<Reweighter<'a>, ModelError> {
        let task_scorer = match guidance.scorer() {
            Some(s) => Some(s.for_task(&sio.symbols)?),
            None => None,
        };
        Ok(Reweighter {
            guidance,
            task_scorer,
            outputs: OutputInfo::new(&task.outputs),
            cache: HashMap::new(),
        })
    }

    /// Probability used to reweight each value, or `None` where the weight
    /// stays unchanged.
    pub fn probabilities(&mut self, values: &[&ValueData]) -> Vec<Option<f64>> {
        let model = match self.guidance {
            Guidance::None => return vec![None; values.len()],
            Guidance::Heuristic => {
                return values.iter().map(|v| heuristic_score(v, self.outputs.outputs())).collect();
            }
            Guidance::Model(_) | Guidance::Combined(_) => self.model_scores(values),
        };
        match self.guidance {
            Guidance::Combined(_) => model
                .into_iter()
                .zip(values)
                .map(|(pm, v)| Some(heuristic_score(v, self.outputs.outputs()).map_or(pm, |ph| (pm + ph) / 2.0)))
                .collect(),
            _ => model.into_iter().map(Some).collect(),
        }
    }

    fn model_scores(&mut self, values: &[&ValueData]) -> Vec<f64> {
        let scorer = self
            .task_scorer
            .as_ref()
            .unwrap_or_else(|| unreachable!("model guidance always has a task scorer"));
        let keys: Vec<u128> = values.iter().map(|v| pack(&self.outputs.vo_signature(v).symbols)).collect();
        let mut missing: Vec<u128> = keys.iter().copied().filter(|k| !self.cache.contains_key(k)).collect();
        missing.sort_unstable();
        missing.dedup();
        if !missing.is_empty() {
            let svos: Vec<Vec<SigSymbol>> = missing.iter().map(|&k| unpack(k)).collect();
            let scores = scorer
                .score_batch(&svos)
                .unwrap_or_else(|e| unreachable!("signature lengths are fixed: {e}"));
            self.cache.extend(missing.into_iter().zip(scores));
        }
        keys.iter().map(|k| self.cache[k]).collect()
    }

    /// Stored weights for a batch of values all generated at weight `w`,
    /// with the probability behind each.
    pub fn reweight(&mut self, values: &[&ValueData], w: u32) -> Vec<(u32, Option<f64>)> {
        self.probabilities(values)
            .into_iter()
            .map(|p| match p {
                Some(p) => (reweighted(w, p.clamp(0.0, 1.0)).unwrap_or(w), Some(p)),
                None => (w, None),
            })
            .collect()
    }
}

/// Drops the `k` operations the premise model rates least likely for
/// `task`; ties drop later table entries first.
pub fn premise_filter(task: &Task, params: &ModelParams, k: usize) -> Result<Vec<Op>, ModelError> {
    if params.kind != ModelKind::Premise {
        return Err(ModelError::Shape("premise filter needs a premise model".into()));
    }
    let sio = io_signature(task);
    let probs = params.forward_batch(&[sio.symbols])?;
    let probs: Vec<f64> = probs.row(0).to_vec();
    Ok(filter_by_scores(&probs, k))
}

pub(crate) fn filter_by_scores(probs: &[f64], k: usize) -> Vec<Op> {
    let mut order: Vec<usize> = (0..NUM_OPS).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]).then(b.cmp(&a)));
    let dropped = &order[..k.min(NUM_OPS)];
    Op::ALL.into_iter().filter(|op| !dropped.contains(&op.index())).collect()
}
