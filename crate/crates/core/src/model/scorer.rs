use ndarray::Array2;

use super::{sigmoid, Activation, ModelError, ModelKind, ModelParams};
use crate::sigs::{SigSymbol, IO_SIG_LEN, VO_SIG_LEN};

/// Guidance-model inference specialised for search.
///
/// The first layer is folded into per-position lookup tables, and everything
/// that does not depend on the value (the IO half, and padding in every VO
/// slot) is summed once per task. Inference runs in `f32`; training and the
/// plain forward pass stay in `f64`.
#[derive(Debug, Clone)]
pub struct Scorer {
    params: ModelParams,
    hidden: usize,
    /// Row `p * 4 + s` (flattened, `hidden` wide) holds symbol `s` at
    /// position `p` pushed through the embedding and the first weight
    /// matrix. VO rows store the difference from padding instead.
    table: Vec<f32>,
    /// Padding rows of the VO positions, concatenated.
    pad_rows: Vec<f32>,
    layers: Vec<Layer32>,
}

#[derive(Debug, Clone)]
struct Layer32 {
    /// Row-major, one row per input unit.
    w: Vec<f32>,
    b: Vec<f32>,
    width: usize,
    act: Activation,
}

const SYMBOLS: usize = SigSymbol::ALL.len();

impl Scorer {
    pub fn new(params: &ModelParams) -> Result<Scorer, ModelError> {
        params.check()?;
        if params.kind != ModelKind::Guidance {
            return Err(ModelError::Shape("scorer needs a guidance model".into()));
        }
        let d = params.d;
        let w1 = &params.layers[0].w;
        let hidden = w1.ncols();
        let mut full = Array2::<f64>::zeros((params.input_symbols() * SYMBOLS, hidden));
        for p in 0..params.input_symbols() {
            for s in 0..SYMBOLS {
                let mut row = full.row_mut(p * SYMBOLS + s);
                for j in 0..d {
                    row.scaled_add(params.embeddings[[s, j]], &w1.row(p * d + j));
                }
            }
        }
        let pad = SigSymbol::Padding.index();
        let mut table = Vec::with_capacity(full.len());
        for p in 0..params.input_symbols() {
            for s in 0..SYMBOLS {
                let row = full.row(p * SYMBOLS + s);
                if p < IO_SIG_LEN {
                    table.extend(row.iter().map(|&v| v as f32));
                } else {
                    let base = full.row(p * SYMBOLS + pad);
                    table.extend(row.iter().zip(base.iter()).map(|(a, b)| (a - b) as f32));
                }
            }
        }
        let pad_rows = (IO_SIG_LEN..params.input_symbols())
            .flat_map(|p| full.row(p * SYMBOLS + pad).to_vec())
            .map(|v| v as f32)
            .collect();
        let layers = params
            .layers
            .iter()
            .map(|l| Layer32 {
                w: l.w.iter().map(|&v| v as f32).collect(),
                b: l.b.iter().map(|&v| v as f32).collect(),
                width: l.w.ncols(),
                act: l.act,
            })
            .collect();
        Ok(Scorer { params: params.clone(), hidden, table, pad_rows, layers })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn row(&self, pos: usize, s: SigSymbol) -> &[f32] {
        let at = (pos * SYMBOLS + s.index()) * self.hidden;
        &self.table[at..at + self.hidden]
    }

    pub fn for_task(&self, sio: &[SigSymbol]) -> Result<TaskScorer<'_>, ModelError> {
        if sio.len() != IO_SIG_LEN {
            return Err(ModelError::Shape(format!("IO signature has {} symbols", sio.len())));
        }
        // Summed in f64 so the per-task part carries no extra rounding.
        let mut base = self.params.layers[0].b.to_vec();
        let mut add64 = |row: &[f32]| base.iter_mut().zip(row).for_each(|(b, &r)| *b += f64::from(r));
        for (p, &s) in sio.iter().enumerate() {
            add64(self.row(p, s));
        }
        for pad in self.pad_rows.chunks_exact(self.hidden) {
            add64(pad);
        }
        Ok(TaskScorer { scorer: self, base: base.into_iter().map(|v| v as f32).collect() })
    }
}

#[derive(Debug, Clone)]
pub struct TaskScorer<'a> {
    scorer: &'a Scorer,
    base: Vec<f32>,
}

impl TaskScorer<'_> {
    /// Probability that each value is a sub-expression of a solution, in
    /// the order given.
    pub fn score_batch<R: AsRef<[SigSymbol]>>(&self, svos: &[R]) -> Result<Vec<f64>, ModelError> {
        if let Some(bad) = svos.iter().find(|v| v.as_ref().len() != VO_SIG_LEN) {
            return Err(ModelError::Shape(format!("VO signature has {} symbols", bad.as_ref().len())));
        }
        let mut out = Vec::with_capacity(svos.len());
        #[cfg(target_arch = "x86_64")]
        if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
            // SAFETY: the features were just detected.
            unsafe { self.score_rows_avx2(svos, &mut out) };
            return Ok(out);
        }
        self.score_rows(svos, &mut out);
        Ok(out)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn score_rows_avx2<R: AsRef<[SigSymbol]>>(&self, svos: &[R], out: &mut Vec<f64>) {
        self.score_rows(svos, out);
    }

    #[inline(always)]
    fn score_rows<R: AsRef<[SigSymbol]>>(&self, svos: &[R], out: &mut Vec<f64>) {
        let layers = &self.scorer.layers;
        let mut z = Vec::with_capacity(self.scorer.hidden);
        let mut next = Vec::new();
        for svo in svos {
            z.clear();
            z.extend_from_slice(&self.base);
            for (q, &s) in svo.as_ref().iter().enumerate() {
                if s != SigSymbol::Padding {
                    axpy(&mut z, 1.0, self.scorer.row(IO_SIG_LEN + q, s));
                }
            }
            relu_or_keep(&mut z, layers[0].act);
            // Row-major accumulation skips the units ReLU zeroed out.
            for l in &layers[1..] {
                next.clear();
                next.extend_from_slice(&l.b);
                for (i, &a) in z.iter().enumerate() {
                    if a != 0.0 {
                        axpy(&mut next, a, &l.w[i * l.width..(i + 1) * l.width]);
                    }
                }
                relu_or_keep(&mut next, l.act);
                std::mem::swap(&mut z, &mut next);
            }
            let last = layers.last().expect("checked models have layers");
            out.push(match last.act {
                Activation::Logistic => sigmoid(f64::from(z[0])),
                Activation::Relu => f64::from(z[0]),
            });
        }
    }

    pub fn score(&self, svo: &[SigSymbol]) -> Result<f64, ModelError> {
        Ok(self.score_batch(&[svo])?[0])
    }
}

/// Hidden ReLUs are applied in place; the logistic output is left as a
/// logit and squashed in `f64` by the caller.
#[inline(always)]
fn relu_or_keep(a: &mut [f32], act: Activation) {
    if act == Activation::Relu {
        a.iter_mut().for_each(|v| *v = v.max(0.0));
    }
}

#[inline(always)]
fn axpy(acc: &mut [f32], a: f32, x: &[f32]) {
    for (y, v) in acc.iter_mut().zip(x) {
        *y += a * v;
    }
}
