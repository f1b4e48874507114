use std::fmt;
use std::sync::Arc;

use super::ops::{apply_op, EvalLimits, Op};
use super::value::{Task, Value, ValueData};
use super::EvalError;

/// A weight-1 expression: an input column or a literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Leaf {
    Var(usize),
    Str(String),
    Int(i64),
}

impl Leaf {
    /// The leaf's value broadcast over the task's example rows.
    pub fn data(&self, task: &Task) -> Result<ValueData, EvalError> {
        let n = task.num_examples();
        Ok(match self {
            Leaf::Var(k) if *k < task.num_inputs() => task.input_data(*k),
            Leaf::Var(k) => return Err(EvalError::UnknownVariable(*k)),
            Leaf::Str(s) => ValueData::Str(vec![s.clone(); n]),
            Leaf::Int(i) => ValueData::Int(vec![*i; n]),
        })
    }
}

impl fmt::Display for Leaf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Leaf::Var(k) => write!(f, "var_{k}"),
            Leaf::Int(i) => write!(f, "{i}"),
            Leaf::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    if c == '"' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("\"")
            }
        }
    }
}

/// A formula tree over the operation table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Leaf(Leaf),
    Call(Op, Vec<Expr>),
}

impl Expr {
    pub fn var(k: usize) -> Expr {
        Expr::Leaf(Leaf::Var(k))
    }

    pub fn str(s: impl Into<String>) -> Expr {
        Expr::Leaf(Leaf::Str(s.into()))
    }

    pub fn int(i: i64) -> Expr {
        Expr::Leaf(Leaf::Int(i))
    }

    pub fn call(op: Op, args: Vec<Expr>) -> Expr {
        Expr::Call(op, args)
    }

    /// Node count: every operation, variable, and literal weighs 1.
    pub fn weight(&self) -> u32 {
        match self {
            Expr::Leaf(_) => 1,
            Expr::Call(op, args) => op.descriptor().cost + args.iter().map(Expr::weight).sum::<u32>(),
        }
    }

    /// Every operation occurring in the tree, with repetition.
    pub fn ops(&self) -> Vec<Op> {
        let mut out = Vec::new();
        self.collect_ops(&mut out);
        out
    }

    fn collect_ops(&self, out: &mut Vec<Op>) {
        if let Expr::Call(op, args) = self {
            out.push(*op);
            for a in args {
                a.collect_ops(out);
            }
        }
    }

    pub fn eval(&self, task: &Task, limits: &EvalLimits) -> Result<Value, EvalError> {
        match self {
            Expr::Leaf(l) => Ok(Value::leaf(l.clone(), l.data(task)?)),
            Expr::Call(op, args) => {
                let args = args
                    .iter()
                    .map(|a| a.eval(task, limits).map(Arc::new))
                    .collect::<Result<Vec<_>, _>>()?;
                apply_op(*op, &args, limits)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Leaf(l) => l.fmt(f),
            Expr::Call(op, args) => {
                write!(f, "{}(", op.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.fmt(f)?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn depth_program() -> Expr {
        Expr::call(
            Op::ToText,
            vec![Expr::call(
                Op::Minus,
                vec![
                    Expr::call(Op::Len, vec![Expr::var(0)]),
                    Expr::call(
                        Op::Len,
                        vec![Expr::call(Op::Substitute, vec![Expr::var(0), Expr::str("/"), Expr::str("")])],
                    ),
                ],
            )],
        )
    }

    #[test]
    fn render_matches_reference_text() {
        assert_eq!(Expr::call(Op::Len, vec![Expr::var(0)]).to_string(), "LEN(var_0)");
        assert_eq!(
            depth_program().to_string(),
            "TO_TEXT(MINUS(LEN(var_0), LEN(SUBSTITUTE(var_0, \"/\", \"\"))))"
        );
        assert_eq!(Expr::str(" ").to_string(), "\" \"");
        assert_eq!(Expr::str("a\"b\\").to_string(), "\"a\\\"b\\\\\"");
    }

    #[test]
    fn leaves_broadcast() {
        let task = Task::new(
            "t",
            vec![vec!["a".into(), "b".into()]],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let v = Expr::var(0).eval(&task, &EvalLimits::default()).unwrap();
        assert_eq!(v.data, ValueData::Str(vec!["a".into(), "b".into()]));
        assert_eq!(v.weight, 1);
        let dash = Expr::str("-").eval(&task, &EvalLimits::default()).unwrap();
        assert_eq!(dash.data, ValueData::Str(vec!["-".into(), "-".into()]));
        assert!(matches!(
            Expr::var(1).eval(&task, &EvalLimits::default()),
            Err(EvalError::UnknownVariable(1))
        ));
    }

    #[test]
    fn evaluation_and_weights() {
        let task = Task::from_pairs("depth", &[("/this/is/a/path", "4"), ("/home", "1"), ("/a/b", "2")]).unwrap();
        let e = depth_program();
        let v = e.eval(&task, &EvalLimits::default()).unwrap();
        assert!(v.data.matches_outputs(&task.outputs));
        assert_eq!(v.weight, e.weight());
        assert_eq!(e.weight(), 9);
        assert_eq!(v.to_expr(), e);
    }

    #[test]
    fn substitute_date_separators() {
        let task = Task::from_pairs("d", &[("2020-01-02", "2020/01/02")]).unwrap();
        let e = Expr::call(Op::Substitute, vec![Expr::var(0), Expr::str("-"), Expr::str("/")]);
        let v = e.eval(&task, &EvalLimits::default()).unwrap();
        assert!(v.data.matches_outputs(&task.outputs));
    }
}
