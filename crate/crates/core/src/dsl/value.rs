use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::expr::{Expr, Leaf};
use super::ops::Op;

/// Largest number of input columns a task may have.
pub const MAX_INPUTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    Str,
    Int,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Str => f.write_str("String"),
            Kind::Int => f.write_str("Integer"),
        }
    }
}

/// One concrete result per example row. Equality and hashing are over the
/// kind and every row, which is what value-based deduplication keys on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ValueData {
    Str(Vec<String>),
    Int(Vec<i64>),
}

impl ValueData {
    pub fn kind(&self) -> Kind {
        match self {
            ValueData::Str(_) => Kind::Str,
            ValueData::Int(_) => Kind::Int,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ValueData::Str(v) => v.len(),
            ValueData::Int(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_strs(&self) -> Option<&[String]> {
        match self {
            ValueData::Str(v) => Some(v),
            ValueData::Int(_) => None,
        }
    }

    pub fn as_ints(&self) -> Option<&[i64]> {
        match self {
            ValueData::Int(v) => Some(v),
            ValueData::Str(_) => None,
        }
    }

    /// Row-wise rendering for display.
    pub fn rows_display(&self) -> Vec<String> {
        match self {
            ValueData::Str(v) => v.clone(),
            ValueData::Int(v) => v.iter().map(|i| i.to_string()).collect(),
        }
    }

    /// Same rows in a different order: `perm[i]` is the source row of row `i`.
    pub fn permuted(&self, perm: &[usize]) -> ValueData {
        match self {
            ValueData::Str(v) => ValueData::Str(perm.iter().map(|&i| v[i].clone()).collect()),
            ValueData::Int(v) => ValueData::Int(perm.iter().map(|&i| v[i]).collect()),
        }
    }

    /// True if this is a string value equal row-for-row to `outputs`.
    pub fn matches_outputs(&self, outputs: &[String]) -> bool {
        matches!(self, ValueData::Str(v) if v.as_slice() == outputs)
    }
}

/// Where a value came from, enough to rebuild an expression for it.
#[derive(Debug, Clone)]
pub enum Provenance {
    Leaf(Leaf),
    Node(Op, Vec<Arc<Value>>),
}

/// The per-example results of one expression, with its weight.
#[derive(Debug, Clone)]
pub struct Value {
    pub data: ValueData,
    pub weight: u32,
    pub provenance: Provenance,
}

impl Value {
    pub fn leaf(leaf: Leaf, data: ValueData) -> Value {
        Value {
            data,
            weight: 1,
            provenance: Provenance::Leaf(leaf),
        }
    }

    pub fn kind(&self) -> Kind {
        self.data.kind()
    }

    /// Rebuilds the expression recorded in the provenance chain.
    pub fn to_expr(&self) -> Expr {
        match &self.provenance {
            Provenance::Leaf(l) => Expr::Leaf(l.clone()),
            Provenance::Node(op, args) => Expr::Call(*op, args.iter().map(|a| a.to_expr()).collect()),
        }
    }

    pub fn render(&self) -> String {
        self.to_expr().to_string()
    }
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("task has no examples")]
    NoExamples,
    #[error("task has {0} input columns; between 1 and {MAX_INPUTS} are supported")]
    InputCount(usize),
    #[error("input column {column} has {got} rows but the output has {expected}")]
    RaggedColumn { column: usize, got: usize, expected: usize },
    #[error("reading task file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing task file: {0}")]
    Json(#[from] serde_json::Error),
}

/// A programming-by-example problem: `K` input columns and one output column
/// over the same `N` example rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub name: String,
    pub inputs: Vec<Vec<String>>,
    pub outputs: Vec<String>,
}

impl Task {
    pub fn new(name: impl Into<String>, inputs: Vec<Vec<String>>, outputs: Vec<String>) -> Result<Task, TaskError> {
        let task = Task {
            name: name.into(),
            inputs,
            outputs,
        };
        task.validate()?;
        Ok(task)
    }

    /// Convenience constructor for single-input tasks given as `(input, output)` rows.
    pub fn from_pairs(name: impl Into<String>, pairs: &[(&str, &str)]) -> Result<Task, TaskError> {
        let inputs = vec![pairs.iter().map(|(i, _)| i.to_string()).collect()];
        let outputs = pairs.iter().map(|(_, o)| o.to_string()).collect();
        Task::new(name, inputs, outputs)
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        let n = self.outputs.len();
        if n == 0 {
            return Err(TaskError::NoExamples);
        }
        let k = self.inputs.len();
        if k == 0 || k > MAX_INPUTS {
            return Err(TaskError::InputCount(k));
        }
        for (column, col) in self.inputs.iter().enumerate() {
            if col.len() != n {
                return Err(TaskError::RaggedColumn {
                    column,
                    got: col.len(),
                    expected: n,
                });
            }
        }
        Ok(())
    }

    pub fn num_examples(&self) -> usize {
        self.outputs.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    /// The input column `k` as a value.
    pub fn input_data(&self, k: usize) -> ValueData {
        ValueData::Str(self.inputs[k].clone())
    }

    /// Reorders example rows; `perm[i]` is the source row of row `i`.
    pub fn permuted(&self, perm: &[usize]) -> Task {
        Task {
            name: self.name.clone(),
            inputs: self
                .inputs
                .iter()
                .map(|c| perm.iter().map(|&i| c[i].clone()).collect())
                .collect(),
            outputs: perm.iter().map(|&i| self.outputs[i].clone()).collect(),
        }
    }
}

/// On-disk task format shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    pub name: String,
    pub inputs: Vec<Vec<String>>,
    pub output: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl TaskFile {
    pub fn load(path: &Path) -> Result<TaskFile, TaskError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_task(&self) -> Result<Task, TaskError> {
        Task::new(self.name.clone(), self.inputs.clone(), self.output.clone())
    }
}

impl From<&Task> for TaskFile {
    fn from(task: &Task) -> TaskFile {
        TaskFile {
            name: task.name.clone(),
            inputs: task.inputs.clone(),
            output: task.outputs.clone(),
            reference: None,
            tags: Vec::new(),
        }
    }
}
