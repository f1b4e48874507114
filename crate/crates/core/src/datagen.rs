//! Training data from searches that cannot succeed: random inputs are paired
//! with an unreachable output, the search runs until its budget, and random
//! stored values then play the role of target programs.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::Path;
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Kind, Provenance, Task, Value, ValueData, NUM_OPS};
use crate::model::{Label, ModelKind, RecordMeta, TrainRecord};
use crate::search::{synthesize_with, SearchConfig, ValueBank};
use crate::sigs::{io_signature_for, OutputInfo};

/// Output character that no input, constant, or operation can produce.
pub const SENTINEL: char = '\u{1}';

pub const DEFAULT_ALPHABET: &str = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 ,.-/";

/// Smallest weight a target must have.
pub const MIN_TARGET_WEIGHT: u32 = 5;

/// Smallest weight of a value used as a positive or negative.
pub const MIN_SAMPLE_WEIGHT: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenConfig {
    pub num_searches: usize,
    pub positives_per_search: usize,
    pub negatives_per_search: usize,
    pub search_budget: u64,
    pub example_rows: RangeInclusive<usize>,
    pub input_variables: RangeInclusive<usize>,
    pub string_length: RangeInclusive<usize>,
    pub alphabet: String,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> GenConfig {
        GenConfig {
            num_searches: 1000,
            positives_per_search: 100,
            negatives_per_search: 100,
            search_budget: 50_000,
            example_rows: 2..=3,
            input_variables: 1..=2,
            string_length: 2..=12,
            alphabet: DEFAULT_ALPHABET.to_string(),
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Config(m.to_string()));
        if self.num_searches == 0 || self.positives_per_search == 0 || self.negatives_per_search == 0 {
            return bad("counts must be positive");
        }
        if self.search_budget == 0 {
            return bad("search budget must be positive");
        }
        if self.example_rows.is_empty() || *self.example_rows.start() == 0 {
            return bad("example rows must be a nonempty range of positive counts");
        }
        if self.input_variables.is_empty()
            || *self.input_variables.start() == 0
            || *self.input_variables.end() > crate::dsl::MAX_INPUTS
        {
            return bad("input variables must lie in 1..=3");
        }
        if self.string_length.is_empty() {
            return bad("string length range is empty");
        }
        if self.alphabet.is_empty() || self.alphabet.contains(SENTINEL) {
            return bad("alphabet must be nonempty and exclude the sentinel");
        }
        Ok(())
    }
}

/// Random input columns for search `index`, reproducible from the seed.
pub fn gen_random_inputs(config: &GenConfig, index: usize) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let alphabet: Vec<char> = config.alphabet.chars().collect();
    let rows = rng.random_range(config.example_rows.clone());
    let vars = rng.random_range(config.input_variables.clone());
    (0..vars)
        .map(|_| {
            (0..rows)
                .map(|_| {
                    let len = rng.random_range(config.string_length.clone());
                    (0..len).map(|_| *alphabet.choose(&mut rng).unwrap_or(&'a')).collect()
                })
                .collect()
        })
        .collect()
}

/// Runs an unguided search toward an unreachable output until the budget
/// runs out and returns everything it stored.
pub fn collect_values(inputs: &[Vec<String>], budget: u64) -> ValueBank {
    let rows = inputs.first().map_or(0, Vec::len);
    let task = Task::new("dummy", inputs.to_vec(), vec![SENTINEL.to_string(); rows])
        .unwrap_or_else(|e| panic!("generated inputs are invalid: {e}"));
    let config = SearchConfig {
        max_expressions: budget,
        max_weight: u32::MAX,
        mine_constants: false,
        ..SearchConfig::default()
    };
    let (_, bank) = synthesize_with(&task, &config, &mut |_| {}).unwrap_or_else(|e| unreachable!("fixed config: {e}"));
    bank
}

/// One sampled value paired with the target it was judged against.
#[derive(Debug, Clone)]
pub struct Triple {
    pub target: Arc<Value>,
    pub value: Arc<Value>,
    pub positive: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Sample {
    pub triples: Vec<Triple>,
    /// Every target drawn, in order, including ones that yielded nothing.
    pub targets: Vec<Arc<Value>>,
    /// Set when the bank could not supply the requested counts.
    pub insufficient: bool,
}

/// Rows of every proper non-leaf sub-expression of `value`.
pub fn subexpression_values(value: &Value) -> Vec<Arc<Value>> {
    fn walk(v: &Value, seen: &mut HashSet<ValueData>, out: &mut Vec<Arc<Value>>) {
        if let Provenance::Node(_, args) = &v.provenance {
            for a in args {
                if matches!(a.provenance, Provenance::Node(..)) && seen.insert(a.data.clone()) {
                    out.push(a.clone());
                }
                walk(a, seen, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(value, &mut HashSet::new(), &mut out);
    out
}

/// Bit per operation marking those used anywhere in `value`'s expression.
pub fn ops_used(value: &Value) -> Vec<u8> {
    let mut bits = vec![0u8; NUM_OPS];
    for op in value.to_expr().ops() {
        bits[op.index()] = 1;
    }
    bits
}

/// Draws targets and labelled values from a bank: each target contributes
/// one positive and one negative until both quotas are met.
pub fn sample_triples(bank: &ValueBank, config: &GenConfig, index: usize) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7a29_e7c1_3b5d_0f11);
    rng.set_stream(index as u64);
    let targets: Vec<&Arc<Value>> = bank
        .values()
        .filter(|v| v.weight >= MIN_TARGET_WEIGHT && v.kind() == Kind::Str)
        .collect();
    let pool: Vec<&Arc<Value>> = bank.values().filter(|v| v.weight >= MIN_SAMPLE_WEIGHT).collect();
    let mut sample = Sample::default();
    if targets.is_empty() {
        sample.insufficient = true;
        return sample;
    }
    let (mut pos, mut neg) = (0, 0);
    let max_draws = 20 * (config.positives_per_search + config.negatives_per_search);
    for _ in 0..max_draws {
        if pos >= config.positives_per_search && neg >= config.negatives_per_search {
            break;
        }
        let target = (*targets.choose(&mut rng).unwrap_or_else(|| unreachable!())).clone();
        sample.targets.push(target.clone());
        let parts = subexpression_values(&target);
        if parts.is_empty() {
            continue;
        }
        if pos < config.positives_per_search {
            let value = parts.choose(&mut rng).unwrap_or_else(|| unreachable!()).clone();
            sample.triples.push(Triple { target: target.clone(), value, positive: true });
            pos += 1;
        }
        if neg < config.negatives_per_search {
            let excluded: HashSet<&ValueData> = parts.iter().map(|p| &p.data).chain([&target.data]).collect();
            for _ in 0..64 {
                let v = *pool.choose(&mut rng).unwrap_or_else(|| unreachable!());
                if !excluded.contains(&v.data) {
                    sample.triples.push(Triple { target: target.clone(), value: v.clone(), positive: false });
                    neg += 1;
                    break;
                }
            }
        }
    }
    sample.insufficient = pos < config.positives_per_search || neg < config.negatives_per_search;
    sample
}

fn target_outputs(target: &Value) -> Vec<String> {
    target
        .data
        .as_strs()
        .unwrap_or_else(|| unreachable!("targets are strings"))
        .to_vec()
}

impl Triple {
    pub fn record(&self, inputs: &[Vec<String>], index: usize) -> TrainRecord {
        let outputs = target_outputs(&self.target);
        TrainRecord {
            sio: io_signature_for(inputs, &outputs).symbols,
            svo: Some(OutputInfo::new(&outputs).vo_signature(&self.value.data).symbols),
            label: Label::Binary(u8::from(self.positive)),
            meta: RecordMeta { search: index, target_weight: self.target.weight },
        }
    }
}

pub fn premise_record(target: &Value, inputs: &[Vec<String>], index: usize) -> TrainRecord {
    TrainRecord {
        sio: io_signature_for(inputs, &target_outputs(target)).symbols,
        svo: None,
        label: Label::Multi(ops_used(target)),
        meta: RecordMeta { search: index, target_weight: target.weight },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetStats {
    pub kind: ModelKind,
    pub records: usize,
    pub positives: usize,
    pub negatives: usize,
    /// Fraction of positive labels (every bit, for premise records).
    pub label_balance: f64,
    pub searches: usize,
    pub insufficient_searches: usize,
    pub config: GenConfig,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub stats: DatasetStats,
    pub records: Vec<TrainRecord>,
}

struct SearchOutput {
    records: Vec<TrainRecord>,
    insufficient: bool,
}

fn run_one(config: &GenConfig, index: usize, kind: ModelKind) -> SearchOutput {
    let inputs = gen_random_inputs(config, index);
    let bank = collect_values(&inputs, config.search_budget);
    let sample = sample_triples(&bank, config, index);
    let records = match kind {
        ModelKind::Guidance => sample.triples.iter().map(|t| t.record(&inputs, index)).collect(),
        ModelKind::Premise => {
            let mut seen = HashSet::new();
            sample
                .triples
                .iter()
                .filter(|t| seen.insert(Arc::as_ptr(&t.target)))
                .map(|t| premise_record(&t.target, &inputs, index))
                .collect()
        }
    };
    SearchOutput { records, insufficient: sample.insufficient }
}

fn run_all(config: &GenConfig, kind: ModelKind) -> Vec<SearchOutput> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..config.num_searches).into_par_iter().map(|i| run_one(config, i, kind)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..config.num_searches).map(|i| run_one(config, i, kind)).collect()
    }
}

fn build(config: &GenConfig, kind: ModelKind) -> Result<Dataset, GenError> {
    config.validate()?;
    let outputs = run_all(config, kind);
    let insufficient_searches = outputs.iter().filter(|o| o.insufficient).count();
    let mut records: Vec<TrainRecord> = outputs.into_iter().flat_map(|o| o.records).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(u64::MAX);
    records.shuffle(&mut rng);
    let (mut positives, mut negatives) = (0, 0);
    for r in &records {
        match &r.label {
            Label::Binary(1) => positives += 1,
            Label::Binary(_) => negatives += 1,
            Label::Multi(bits) => {
                let on = bits.iter().filter(|&&b| b == 1).count();
                positives += on;
                negatives += bits.len() - on;
            }
        }
    }
    let total = positives + negatives;
    let stats = DatasetStats {
        kind,
        records: records.len(),
        positives,
        negatives,
        label_balance: if total == 0 { 0.0 } else { positives as f64 / total as f64 },
        searches: config.num_searches,
        insufficient_searches,
        config: config.clone(),
    };
    Ok(Dataset { stats, records })
}

/// Guidance-model records from `config.num_searches` searches, shuffled.
pub fn build_dataset(config: &GenConfig) -> Result<Dataset, GenError> {
    build(config, ModelKind::Guidance)
}

/// One operation-usage record per distinct sampled target.
pub fn build_premise_dataset(config: &GenConfig) -> Result<Dataset, GenError> {
    build(config, ModelKind::Premise)
}

#[derive(Serialize, Deserialize)]
struct Header {
    stats: DatasetStats,
}

/// JSON lines: a `{"stats": ...}` header, then one record per line.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), GenError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &Header { stats: dataset.stats.clone() })?;
    w.write_all(b"\n")?;
    for r in &dataset.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records back, skipping the stats header if present.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<(Option<DatasetStats>, Vec<TrainRecord>), GenError> {
    let reader = BufReader::new(File::open(path)?);
    let mut stats = None;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.starts_with("{\"stats\"") {
            stats = Some(serde_json::from_str::<Header>(&line)?.stats);
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok((stats, records))
}
