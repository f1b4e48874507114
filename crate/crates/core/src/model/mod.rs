//! Feed-forward classifiers over embedded signature symbols.
//!
//! The guidance model sees the 152-symbol concatenation of an IO and a VO
//! signature and predicts whether the value belongs to a solution. The
//! premise model sees only the 107-symbol IO signature and predicts, for each
//! of the 18 operations, whether a solution uses it.
//!
//! Each symbol is looked up in a 4 x d embedding table, the embeddings are
//! concatenated, and the result goes through dense layers with ReLU hidden
//! activations and logistic outputs.

mod io;
mod scorer;
mod train;

pub use io::{load_params, save_params, FORMAT_VERSION};
pub use scorer::{Scorer, TaskScorer};
pub use train::{auc, train_classifier, train_op_classifier, Label, Metrics, RecordMeta, TrainRecord};

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::NUM_OPS;
use crate::sigs::{SigSymbol, FEATURE_LEN, IO_SIG_LEN};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains a single class; both labels are required")]
    SingleClass,
    #[error("weight file version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("malformed weight file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Guidance,
    Premise,
}

impl ModelKind {
    /// Number of signature symbols in one input row.
    pub fn input_symbols(self) -> usize {
        match self {
            ModelKind::Guidance => FEATURE_LEN,
            ModelKind::Premise => IO_SIG_LEN,
        }
    }

    pub fn output_dim(self) -> usize {
        match self {
            ModelKind::Guidance => 1,
            ModelKind::Premise => NUM_OPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Logistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// Shape `(inputs, outputs)`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub d: usize,
    /// Shape `(4, d)`, rows in [`SigSymbol`] order.
    pub embeddings: Array2<f64>,
    pub layers: Vec<Dense>,
    pub version: u32,
}

/// Architecture and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub d: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
}

impl Hyper {
    pub fn guidance() -> Hyper {
        Hyper {
            d: 8,
            hidden: vec![256, 64],
            epochs: 10,
            batch_size: 256,
            learning_rate: 1e-3,
            validation_fraction: 0.1,
        }
    }

    /// Same shape as the guidance model but wider.
    pub fn premise() -> Hyper {
        Hyper {
            hidden: vec![512, 128],
            ..Hyper::guidance()
        }
    }

    pub fn for_kind(kind: ModelKind) -> Hyper {
        match kind {
            ModelKind::Guidance => Hyper::guidance(),
            ModelKind::Premise => Hyper::premise(),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.d == 0 || self.hidden.contains(&0) {
            return Err(ModelError::InvalidHyper("widths must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(ModelError::InvalidHyper("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidHyper("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(ModelError::InvalidHyper("validation fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Seeded initialization: uniform embeddings, He-uniform ReLU layers,
/// Glorot-uniform output layer, zero biases.
pub fn init_params(kind: ModelKind, hyper: &Hyper, seed: u64) -> Result<ModelParams, ModelError> {
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embeddings = Array2::from_shape_fn((SigSymbol::ALL.len(), hyper.d), |_| rng.random_range(-1.0..1.0));
    let mut widths = vec![kind.input_symbols() * hyper.d];
    widths.extend(&hyper.hidden);
    widths.push(kind.output_dim());
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for (i, pair) in widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let last = i == widths.len() - 2;
        let limit = if last {
            (6.0 / (fan_in + fan_out) as f64).sqrt()
        } else {
            (6.0 / fan_in as f64).sqrt()
        };
        layers.push(Dense {
            w: Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit)),
            b: Array1::zeros(fan_out),
            act: if last { Activation::Logistic } else { Activation::Relu },
        });
    }
    Ok(ModelParams {
        kind,
        d: hyper.d,
        embeddings,
        layers,
        version: FORMAT_VERSION,
    })
}

/// Per-layer inputs and pre-activations from one forward pass.
struct Trace {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

/// Gradients with the same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: Array2<f64>,
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl ModelParams {
    pub fn input_symbols(&self) -> usize {
        self.kind.input_symbols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.b.len())
    }

    /// Checks the invariants a loaded or constructed model must satisfy.
    pub fn check(&self) -> Result<(), ModelError> {
        if self.embeddings.dim() != (SigSymbol::ALL.len(), self.d) || self.d == 0 {
            return Err(ModelError::Malformed("embedding table must be 4 x d".into()));
        }
        let mut width = self.input_symbols() * self.d;
        if self.layers.is_empty() {
            return Err(ModelError::Malformed("no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.w.nrows() != width || l.w.ncols() != l.b.len() {
                return Err(ModelError::Malformed(format!("layer {i} does not chain: expected {width} inputs")));
            }
            let last = i + 1 == self.layers.len();
            if last != (l.act == Activation::Logistic) {
                return Err(ModelError::Malformed("only the output layer is logistic".into()));
            }
            width = l.b.len();
        }
        if width != self.kind.output_dim() {
            return Err(ModelError::Malformed(format!("output width {width} does not match model kind")));
        }
        let finite = self.embeddings.iter().all(|v| v.is_finite())
            && self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()));
        if !finite {
            return Err(ModelError::Malformed("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Concatenated embeddings of each row, shape `(rows, symbols * d)`.
    fn embed<R: AsRef<[SigSymbol]>>(&self, batch: &[R]) -> Result<Array2<f64>, ModelError> {
        let symbols = self.input_symbols();
        let d = self.d;
        let mut x = Array2::zeros((batch.len(), symbols * d));
        for (r, row) in batch.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != symbols {
                return Err(ModelError::Shape(format!("row {r} has {} symbols, expected {symbols}", row.len())));
            }
            let mut xr = x.row_mut(r);
            let xs = xr.as_slice_mut().unwrap_or_else(|| unreachable!());
            for (p, s) in row.iter().enumerate() {
                let e = self.embeddings.row(s.index());
                for j in 0..d {
                    xs[p * d + j] = e[j];
                }
            }
        }
        Ok(x)
    }

    fn forward_trace(&self, x: Array2<f64>) -> Trace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x;
        for l in &self.layers {
            let z = a.dot(&l.w) + &l.b;
            let next = match l.act {
                Activation::Relu => z.mapv(|v| v.max(0.0)),
                Activation::Logistic => z.mapv(sigmoid),
            };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Trace { inputs, pre, output: a }
    }

    /// Output probabilities, shape `(rows, output_dim)`. Row `i` depends only
    /// on `batch[i]`.
    pub fn forward_batch<R: AsRef<[SigSymbol]>>(&self, batch: &[R]) -> Result<Array2<f64>, ModelError> {
        let x = self.embed(batch)?;
        Ok(self.forward_trace(x).output)
    }

    /// Mean elementwise binary cross-entropy over `labels` (shape
    /// `(rows, output_dim)`, entries 0 or 1) and its gradient with respect to
    /// every parameter, embeddings included.
    pub fn loss_and_grads<R: AsRef<[SigSymbol]>>(
        &self,
        batch: &[R],
        labels: &Array2<f64>,
    ) -> Result<(f64, Gradients), ModelError> {
        if labels.dim() != (batch.len(), self.output_dim()) {
            return Err(ModelError::Shape(format!(
                "labels are {:?}, expected ({}, {})",
                labels.dim(),
                batch.len(),
                self.output_dim()
            )));
        }
        if batch.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let rows: Vec<&[SigSymbol]> = batch.iter().map(|r| r.as_ref()).collect();
        let x = self.embed(&rows)?;
        let trace = self.forward_trace(x);
        let nl = self.layers.len();
        let logits = &trace.pre[nl - 1];
        let count = labels.len() as f64;
        let loss = logits
            .iter()
            .zip(labels.iter())
            .map(|(&z, &y)| softplus(z) - y * z)
            .sum::<f64>()
            / count;

        let mut delta = (&trace.output - labels) / count;
        let mut layer_grads = Vec::with_capacity(nl);
        for li in (0..nl).rev() {
            let gw = trace.inputs[li].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            layer_grads.push((gw, gb));
            let back = delta.dot(&self.layers[li].w.t());
            delta = if li > 0 {
                let z_prev = &trace.pre[li - 1];
                let mut back = back;
                back.zip_mut_with(z_prev, |g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
                back
            } else {
                back
            };
        }
        layer_grads.reverse();

        let d = self.d;
        let mut ge = Array2::zeros(self.embeddings.dim());
        for (r, row) in rows.iter().enumerate() {
            let dx = delta.row(r);
            for (p, s) in row.iter().enumerate() {
                let mut g = ge.row_mut(s.index());
                for j in 0..d {
                    g[j] += dx[p * d + j];
                }
            }
        }
        Ok((
            loss,
            Gradients {
                embeddings: ge,
                layers: layer_grads,
            },
        ))
    }

    /// Visits every scalar parameter mutably, in a fixed order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.embeddings.iter_mut().for_each(&mut f);
        for l in &mut self.layers {
            l.w.iter_mut().for_each(&mut f);
            l.b.iter_mut().for_each(&mut f);
        }
    }

    pub fn num_params(&self) -> usize {
        self.embeddings.len() + self.layers.iter().map(|l| l.w.len() + l.b.len()).sum::<usize>()
    }
}

impl Gradients {
    /// All gradient entries in the same order as
    /// [`ModelParams::for_each_param_mut`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.embeddings.iter().copied().collect();
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
