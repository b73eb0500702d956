//! A small closed expression language for step-indexed scripts.
//!
//! Grammar: numbers, the variables `k` (step), `T` (sampling period) and `r`
//! (target velocity), `+ - * /`, unary minus, parentheses, `sqrt(e)` and
//! `parity(even, odd)` which selects by the parity of `k`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("expression `{source_text}`, column {column}: {message}")]
pub struct ExprError {
    pub source_text: String,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalContext {
    pub k: i64,
    pub period: f64,
    pub target_velocity: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Step,
    Period,
    Velocity,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Sqrt(Box<Node>),
    Parity(Box<Node>, Box<Node>),
}

impl Node {
    fn eval(&self, ctx: &EvalContext) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Step => ctx.k as f64,
            Node::Period => ctx.period,
            Node::Velocity => ctx.target_velocity,
            Node::Neg(a) => -a.eval(ctx),
            Node::Add(a, b) => a.eval(ctx) + b.eval(ctx),
            Node::Sub(a, b) => a.eval(ctx) - b.eval(ctx),
            Node::Mul(a, b) => a.eval(ctx) * b.eval(ctx),
            Node::Div(a, b) => a.eval(ctx) / b.eval(ctx),
            Node::Sqrt(a) => a.eval(ctx).sqrt(),
            Node::Parity(even, odd) => {
                if ctx.k.rem_euclid(2) == 0 {
                    even.eval(ctx)
                } else {
                    odd.eval(ctx)
                }
            }
        }
    }
}

/// A parsed expression that remembers its source text.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Expr {
    source: String,
    node: Node,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, ExprError> {
        let mut parser = Parser {
            src: source,
            pos: 0,
        };
        let node = parser.sum()?;
        parser.skip_ws();
        if parser.pos < source.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(Self {
            source: source.to_string(),
            node,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            source: format!("{value:?}"),
            node: Node::Num(value),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, ctx: &EvalContext) -> f64 {
        self.node.eval(ctx)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl TryFrom<String> for Expr {
    type Error = ExprError;
    fn try_from(s: String) -> Result<Self, ExprError> {
        Expr::parse(&s)
    }
}

impl From<Expr> for String {
    fn from(e: Expr) -> String {
        e.source
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ExprError {
        ExprError {
            source_text: self.src.to_string(),
            column: self.pos + 1,
            message: message.to_string(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        self.skip_ws();
        if self.eat('(') {
            let inner = self.sum()?;
            self.expect(')')?;
            return Ok(inner);
        }
        let rest = self.rest();
        let Some(first) = rest.chars().next() else {
            return Err(self.error("unexpected end of expression"));
        };
        if first.is_ascii_digit() || first == '.' {
            let len = rest
                .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E'))
                .unwrap_or(rest.len());
            // allow a signed exponent such as 1e-3
            let len = match rest[..len].ends_with(['e', 'E']) {
                true if rest[len..].starts_with(['+', '-']) => {
                    len + 1
                        + rest[len + 1..]
                            .find(|c: char| !c.is_ascii_digit())
                            .unwrap_or(rest.len() - len - 1)
                }
                _ => len,
            };
            let text = &rest[..len];
            let value: f64 = text
                .parse()
                .map_err(|_| self.error(&format!("bad number `{text}`")))?;
            self.pos += len;
            return Ok(Node::Num(value));
        }
        if first.is_ascii_alphabetic() {
            let len = rest
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .unwrap_or(rest.len());
            let name = &rest[..len];
            let start = self.pos;
            self.pos += len;
            return match name {
                "k" => Ok(Node::Step),
                "T" => Ok(Node::Period),
                "r" => Ok(Node::Velocity),
                "sqrt" => {
                    self.expect('(')?;
                    let arg = self.sum()?;
                    self.expect(')')?;
                    Ok(Node::Sqrt(Box::new(arg)))
                }
                "parity" => {
                    self.expect('(')?;
                    let even = self.sum()?;
                    self.expect(',')?;
                    let odd = self.sum()?;
                    self.expect(')')?;
                    Ok(Node::Parity(Box::new(even), Box::new(odd)))
                }
                _ => {
                    self.pos = start;
                    Err(self.error(&format!("unknown name `{name}`")))
                }
            };
        }
        Err(self.error(&format!("unexpected character `{first}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(k: i64) -> EvalContext {
        EvalContext {
            k,
            period: 0.01,
            target_velocity: 100.0,
        }
    }

    fn eval(src: &str, k: i64) -> f64 {
        Expr::parse(src).unwrap().eval(&at(k))
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("1 + 2 * 3", 0), 7.0);
        assert_eq!(eval("(1 + 2) * 3", 0), 9.0);
        assert_eq!(eval("-2 - -3", 0), 1.0);
        assert_eq!(eval("8 / 4 / 2", 0), 1.0);
        assert_eq!(eval("1.5e2", 0), 150.0);
        assert_eq!(eval("2.5E-1*4", 0), 1.0);
    }

    #[test]
    fn variables_and_functions() {
        assert!((eval("2 + k*T*r", 10) - 12.0).abs() < 1e-12);
        assert!((eval("0.1*k + 5*sqrt(k)", 4) - 10.4).abs() < 1e-12);
        assert_eq!(eval("parity(1, 2)", 6), 1.0);
        assert_eq!(eval("parity(1, 2)", 7), 2.0);
        assert_eq!(eval("parity(1, 2)", -1), 2.0);
    }

    #[test]
    fn errors_carry_columns() {
        let e = Expr::parse("1 + q").unwrap_err();
        assert_eq!(e.column, 5);
        assert!(Expr::parse("sqrt(2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("parity(1)").is_err());
    }

    #[test]
    fn keeps_source() {
        let e = Expr::parse(" 2 + k ").unwrap();
        assert_eq!(e.source(), " 2 + k ");
        assert_eq!(Expr::constant(200.0).eval(&at(3)), 200.0);
    }
}
