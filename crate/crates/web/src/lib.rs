//! Browser bindings: synthesize a formula from examples, show a task's
//! property signature, and evaluate a formula against the examples.
//!
//! Every entry point takes and returns JSON text. The plain functions are
//! usable natively; the `#[wasm_bindgen]` wrappers turn errors into JS
//! exceptions.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sheetsynth::dsl::{parse_formula, EvalLimits, Task, TaskFile};
use sheetsynth::model::{ModelParams, Scorer};
use sheetsynth::search::{synthesize, Guidance, SearchConfig};
use sheetsynth::sigs::{io_position_names, io_signature, SigSymbol};
use wasm_bindgen::prelude::*;

/// Browser searches stop at this wall-clock limit whatever the caller asks.
const MAX_SECONDS: f64 = 20.0;

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SynthRequest {
    pub task: TaskFile,
    #[serde(default = "default_guidance")]
    pub guidance: String,
    #[serde(default = "default_budget")]
    pub max_expressions: u64,
    /// Weight file contents, needed for `model` and `combined` guidance.
    #[serde(default)]
    pub model: Option<String>,
}

fn default_guidance() -> String {
    "heuristic".into()
}

fn default_budget() -> u64 {
    2_000_000
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct SynthResponse {
    pub solved: bool,
    pub formula: Option<String>,
    pub expressions: u64,
    pub values_stored: usize,
    pub milliseconds: f64,
    pub termination: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SignatureEntry {
    pub property: String,
    pub symbol: String,
}

fn task_from(file: &TaskFile) -> Result<Task, String> {
    file.to_task().map_err(|e| e.to_string())
}

pub fn synthesize_json(request: &str) -> Result<String, String> {
    let req: SynthRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let task = task_from(&req.task)?;
    let scorer = || -> Result<Arc<Scorer>, String> {
        let text = req.model.as_deref().ok_or("model guidance needs weights")?;
        let params = ModelParams::from_json(text).map_err(|e| e.to_string())?;
        Ok(Arc::new(Scorer::new(&params).map_err(|e| e.to_string())?))
    };
    let guidance = match req.guidance.as_str() {
        "none" => Guidance::None,
        "heuristic" => Guidance::Heuristic,
        "model" => Guidance::Model(scorer()?),
        "combined" => Guidance::Combined(scorer()?),
        other => return Err(format!("unknown guidance {other:?}")),
    };
    let config = SearchConfig {
        max_expressions: req.max_expressions,
        time_budget: Some(Duration::from_secs_f64(MAX_SECONDS)),
        guidance,
        ..SearchConfig::default()
    };
    let r = synthesize(&task, &config).map_err(|e| e.to_string())?;
    let response = SynthResponse {
        solved: r.solved,
        formula: r.formula,
        expressions: r.expressions_considered,
        values_stored: r.values_stored,
        milliseconds: r.elapsed.as_secs_f64() * 1e3,
        termination: format!("{:?}", r.termination),
    };
    serde_json::to_string(&response).map_err(|e| e.to_string())
}

/// The task's IO signature, one entry per property that applies (padding
/// for unused input slots is left out).
pub fn signature_json(task: &str) -> Result<String, String> {
    let file: TaskFile = serde_json::from_str(task).map_err(|e| e.to_string())?;
    let sig = io_signature(&task_from(&file)?);
    let entries: Vec<SignatureEntry> = io_position_names()
        .into_iter()
        .zip(sig.symbols)
        .filter(|(_, s)| *s != SigSymbol::Padding)
        .map(|(property, s)| SignatureEntry { property, symbol: format!("{s:?}") })
        .collect();
    serde_json::to_string(&entries).map_err(|e| e.to_string())
}

/// Evaluates `formula` on every example row and returns the outputs.
pub fn evaluate_json(formula: &str, task: &str) -> Result<String, String> {
    let file: TaskFile = serde_json::from_str(task).map_err(|e| e.to_string())?;
    let task = task_from(&file)?;
    let expr = parse_formula(formula).map_err(|e| e.to_string())?;
    let value = expr.eval(&task, &EvalLimits::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&value.data.rows_display()).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = synthesize)]
pub fn synthesize_js(request: &str) -> Result<String, JsError> {
    synthesize_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = signature)]
pub fn signature_js(task: &str) -> Result<String, JsError> {
    signature_json(task).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = evaluate)]
pub fn evaluate_js(formula: &str, task: &str) -> Result<String, JsError> {
    evaluate_json(formula, task).map_err(|e| JsError::new(&e))
}
