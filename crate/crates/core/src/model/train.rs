use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{init_params, Hyper, ModelError, ModelKind, ModelParams};
use crate::dsl::NUM_OPS;
use crate::sigs::{SigSymbol, IO_SIG_LEN, VO_SIG_LEN};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    /// 1 if the value is a sub-expression of the target.
    Binary(u8),
    /// One 0/1 entry per operation, in op-table order.
    Multi(Vec<u8>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecordMeta {
    pub search: usize,
    pub target_weight: u32,
}

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub sio: Vec<SigSymbol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svo: Option<Vec<SigSymbol>>,
    pub label: Label,
    pub meta: RecordMeta,
}

impl TrainRecord {
    pub fn kind(&self) -> ModelKind {
        match self.label {
            Label::Binary(_) => ModelKind::Guidance,
            Label::Multi(_) => ModelKind::Premise,
        }
    }

    /// Model input row for this record.
    pub fn features(&self) -> Vec<SigSymbol> {
        let mut f = self.sio.clone();
        if let Some(svo) = &self.svo {
            f.extend_from_slice(svo);
        }
        f
    }

    fn check(&self, kind: ModelKind) -> Result<(), ModelError> {
        let ok = match (&self.label, &self.svo, kind) {
            (Label::Binary(y), Some(svo), ModelKind::Guidance) => *y <= 1 && svo.len() == VO_SIG_LEN,
            (Label::Multi(bits), None, ModelKind::Premise) => bits.len() == NUM_OPS && bits.iter().all(|&b| b <= 1),
            _ => false,
        };
        if ok && self.sio.len() == IO_SIG_LEN {
            Ok(())
        } else {
            Err(ModelError::Shape(format!("record does not match a {kind:?} model")))
        }
    }

    fn label_row(&self) -> Vec<f64> {
        match &self.label {
            Label::Binary(y) => vec![f64::from(*y)],
            Label::Multi(bits) => bits.iter().map(|&b| f64::from(b)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Metrics {
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub validation_loss: f64,
    /// Fraction of validation labels (every bit, for the premise model)
    /// predicted correctly at threshold 0.5.
    pub validation_accuracy: f64,
    /// Area under the ROC curve over all validation labels.
    pub validation_auc: f64,
    pub train_records: usize,
    pub validation_records: usize,
}

/// Area under the ROC curve by the rank-sum statistic, ties averaged.
/// Returns 0.5 when either class is absent.
pub fn auc(scores: &[f64], labels: &[bool]) -> f64 {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return 0.5;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * avg_rank;
        i = j + 1;
    }
    let pos = pos as f64;
    (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg as f64)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let mut k = 0;
        params.for_each_param_mut(|p| {
            let g = grads[k];
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * g;
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * g * g;
            *p -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
            k += 1;
        });
    }
}

fn labels_of(records: &[&TrainRecord], width: usize) -> Array2<f64> {
    let mut y = Array2::zeros((records.len(), width));
    for (r, rec) in records.iter().enumerate() {
        for (c, v) in rec.label_row().into_iter().enumerate() {
            y[[r, c]] = v;
        }
    }
    y
}

fn train(kind: ModelKind, dataset: &[TrainRecord], hyper: &Hyper, seed: u64) -> Result<(ModelParams, Metrics), ModelError> {
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    for rec in dataset {
        rec.check(kind)?;
    }
    let (mut any_pos, mut any_neg) = (false, false);
    for rec in dataset {
        for v in rec.label_row() {
            if v > 0.5 {
                any_pos = true;
            } else {
                any_neg = true;
            }
        }
    }
    if !(any_pos && any_neg) {
        return Err(ModelError::SingleClass);
    }

    let mut params = init_params(kind, hyper, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_da7a);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((dataset.len() as f64) * hyper.validation_fraction).round() as usize;
    let n_val = n_val.min(dataset.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let width = kind.output_dim();
    let mut adam = Adam::new(params.num_params(), hyper.learning_rate);
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in train_idx.chunks(hyper.batch_size) {
            let recs: Vec<&TrainRecord> = chunk.iter().map(|&i| &dataset[i]).collect();
            let x: Vec<Vec<SigSymbol>> = recs.iter().map(|r| r.features()).collect();
            let y = labels_of(&recs, width);
            let (loss, grads) = params.loss_and_grads(&x, &y)?;
            adam.step(&mut params, &grads.flatten());
            total += loss * chunk.len() as f64;
        }
        epoch_losses.push(total / train_idx.len() as f64);
    }

    let eval_idx: &[usize] = if val_idx.is_empty() { &train_idx } else { val_idx };
    let (validation_loss, validation_accuracy, validation_auc) = evaluate(&params, dataset, eval_idx)?;
    let metrics = Metrics {
        epoch_losses,
        validation_loss,
        validation_accuracy,
        validation_auc,
        train_records: train_idx.len(),
        validation_records: val_idx.len(),
    };
    Ok((params, metrics))
}

fn evaluate(params: &ModelParams, dataset: &[TrainRecord], idx: &[usize]) -> Result<(f64, f64, f64), ModelError> {
    let mut scores = Vec::new();
    let mut truth = Vec::new();
    let mut loss = 0.0;
    for chunk in idx.chunks(1024) {
        let recs: Vec<&TrainRecord> = chunk.iter().map(|&i| &dataset[i]).collect();
        let x: Vec<Vec<SigSymbol>> = recs.iter().map(|r| r.features()).collect();
        let p = params.forward_batch(&x)?;
        for (r, rec) in recs.iter().enumerate() {
            for (c, y) in rec.label_row().into_iter().enumerate() {
                let pr = p[[r, c]].clamp(1e-12, 1.0 - 1e-12);
                loss -= y * pr.ln() + (1.0 - y) * (1.0 - pr).ln();
                scores.push(p[[r, c]]);
                truth.push(y > 0.5);
            }
        }
    }
    let correct = scores.iter().zip(&truth).filter(|(&s, &t)| (s >= 0.5) == t).count();
    let n = scores.len() as f64;
    Ok((loss / n, correct as f64 / n, auc(&scores, &truth)))
}

/// Trains the guidance classifier on `(sio, svo, 0/1)` records.
pub fn train_classifier(dataset: &[TrainRecord], hyper: &Hyper, seed: u64) -> Result<(ModelParams, Metrics), ModelError> {
    train(ModelKind::Guidance, dataset, hyper, seed)
}

/// Trains the multi-label operation classifier on `(sio, op bits)` records.
pub fn train_op_classifier(dataset: &[TrainRecord], hyper: &Hyper, seed: u64) -> Result<(ModelParams, Metrics), ModelError> {
    train(ModelKind::Premise, dataset, hyper, seed)
}
