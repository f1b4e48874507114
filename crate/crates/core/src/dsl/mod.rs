//! The spreadsheet expression language: tasks, per-example values, the
//! operation table, evaluation, and formula text.

mod expr;
mod ops;
mod parse;
mod value;

pub use expr::{Expr, Leaf};
pub use ops::{apply_op, apply_rows, op_table, EvalLimits, Op, OpDescriptor, NUM_OPS};
pub use parse::{parse_formula, ParseError};
pub use value::{Kind, Provenance, Task, TaskError, TaskFile, Value, ValueData, MAX_INPUTS};

use thiserror::Error;

/// Why a candidate expression could not be evaluated on some example row.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{op}: argument out of range on row {row}")]
    BadArgument { op: &'static str, row: usize },
    #[error("FIND: needle not present on row {row}")]
    NotFound { row: usize },
    #[error("{op}: string result longer than the limit on row {row}")]
    StringTooLong { op: &'static str, row: usize },
    #[error("{op}: integer result outside the magnitude limit on row {row}")]
    IntegerOverflow { op: &'static str, row: usize },
    #[error("{op}: arguments do not match the operation signature")]
    Mismatch { op: &'static str },
    #[error("variable var_{0} is not an input of this task")]
    UnknownVariable(usize),
}
