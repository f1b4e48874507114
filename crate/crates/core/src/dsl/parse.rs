use thiserror::Error;

use super::expr::{Expr, Leaf};
use super::ops::Op;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown function {name} at byte {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("{name} does not take {got} arguments (byte {pos})")]
    Arity { name: String, got: usize, pos: usize },
}

/// Parses formula text such as `UPPER(LEFT(var_0, 1))`.
///
/// `CONCATENATE` accepts two or more arguments and is folded into nested
/// binary calls from the right. Function names outside the operation table
/// are rejected with [`ParseError::UnknownFunction`].
pub fn parse_formula(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.syntax("trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some('"') => self.string().map(|s| Expr::Leaf(Leaf::Str(s))),
            Some(c) if c == '-' || c.is_ascii_digit() => self.integer(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.ident_or_call(),
            Some(_) => Err(self.syntax("unexpected character")),
            None => Err(self.syntax("unexpected end of formula")),
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.syntax("unterminated string literal")),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some(c @ ('"' | '\\')) => out.push(c),
                    _ => return Err(self.syntax("invalid escape in string literal")),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn integer(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        if self.peek() == Some('-') {
            self.bump();
        }
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        self.src[start..self.pos]
            .parse::<i64>()
            .map(Expr::int)
            .map_err(|_| ParseError::Syntax {
                pos: start,
                message: "invalid integer literal".into(),
            })
    }

    fn ident_or_call(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            self.bump();
        }
        let name = &self.src[start..self.pos];
        self.skip_ws();
        if self.peek() != Some('(') {
            return match name.strip_prefix("var_").and_then(|k| k.parse::<usize>().ok()) {
                Some(k) => Ok(Expr::var(k)),
                None => Err(ParseError::Syntax {
                    pos: start,
                    message: format!("unknown identifier {name}"),
                }),
            };
        }
        if !Op::is_known_name(name) {
            return Err(ParseError::UnknownFunction {
                name: name.to_string(),
                pos: start,
            });
        }
        self.bump();
        let mut args = Vec::new();
        self.skip_ws();
        if self.peek() == Some(')') {
            self.bump();
        } else {
            loop {
                args.push(self.expr()?);
                self.skip_ws();
                match self.bump() {
                    Some(',') => continue,
                    Some(')') => break,
                    _ => return Err(self.syntax("expected ',' or ')'")),
                }
            }
        }
        let arity_error = |got| ParseError::Arity {
            name: name.to_string(),
            got,
            pos: start,
        };
        if name.eq_ignore_ascii_case("CONCATENATE") {
            if args.len() < 2 {
                return Err(arity_error(args.len()));
            }
            let mut it = args.into_iter().rev();
            let last = it.next().unwrap_or_else(|| unreachable!());
            return Ok(it.fold(last, |acc, a| Expr::call(Op::Concatenate, vec![a, acc])));
        }
        match Op::lookup(name, args.len()) {
            Some(op) => Ok(Expr::call(op, args)),
            None => Err(arity_error(args.len())),
        }
    }
}
