//! A small arithmetic grammar for user-supplied radial profiles.
//!
//! Custom models supply `ξ` and `ρ` as closed-form expressions in the radial
//! variable `r`; tabulated input is rejected by design because the flow
//! operators need exact first (and for `ρ`, second) derivatives. Derivatives
//! are produced symbolically, so a parsed profile evaluates `(f, f', f'')`
//! consistently to machine precision.
//!
//! Grammar (usual precedence, `^` right-associative):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'r' | name '(' expr ')' | '(' expr ')'
//! name  := sinh | cosh | tanh | exp | ln | log | sqrt | sin | cos | tan
//! ```

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Tan,
}

impl Func {
    fn eval(self, x: f64) -> f64 {
        match self {
            Func::Sinh => math::sinh(x),
            Func::Cosh => math::cosh(x),
            Func::Tanh => math::tanh(x),
            Func::Exp => math::exp(x),
            Func::Ln => math::ln(x),
            Func::Sqrt => math::sqrt(x),
            Func::Sin => math::sin(x),
            Func::Cos => math::cos(x),
            Func::Tan => math::tan(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var,
    Add(Arc<Node>, Arc<Node>),
    Sub(Arc<Node>, Arc<Node>),
    Mul(Arc<Node>, Arc<Node>),
    Div(Arc<Node>, Arc<Node>),
    Pow(Arc<Node>, Arc<Node>),
    Neg(Arc<Node>),
    Call(Func, Arc<Node>),
}

impl Node {
    fn eval(&self, r: f64) -> f64 {
        match self {
            Node::Num(c) => *c,
            Node::Var => r,
            Node::Add(a, b) => a.eval(r) + b.eval(r),
            Node::Sub(a, b) => a.eval(r) - b.eval(r),
            Node::Mul(a, b) => a.eval(r) * b.eval(r),
            Node::Div(a, b) => a.eval(r) / b.eval(r),
            Node::Pow(a, b) => math::pow(a.eval(r), b.eval(r)),
            Node::Neg(a) => -a.eval(r),
            Node::Call(f, a) => f.eval(a.eval(r)),
        }
    }

    fn constant(&self) -> Option<f64> {
        match self {
            Node::Num(c) => Some(*c),
            _ => None,
        }
    }
}

fn num(c: f64) -> Arc<Node> {
    Arc::new(Node::Num(c))
}

fn add(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => num(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Arc::new(Node::Add(a, b)),
    }
}

fn sub(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => num(x - y),
        (_, Some(0.0)) => a,
        (Some(0.0), _) => Arc::new(Node::Neg(b)),
        _ => Arc::new(Node::Sub(a, b)),
    }
}

fn mul(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => num(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Arc::new(Node::Mul(a, b)),
    }
}

fn div(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => num(x / y),
        (Some(0.0), _) => num(0.0),
        (_, Some(1.0)) => a,
        _ => Arc::new(Node::Div(a, b)),
    }
}

fn pow(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => num(math::pow(x, y)),
        (_, Some(1.0)) => a,
        (_, Some(0.0)) => num(1.0),
        _ => Arc::new(Node::Pow(a, b)),
    }
}

fn neg(a: Arc<Node>) -> Arc<Node> {
    match a.constant() {
        Some(x) => num(-x),
        None => Arc::new(Node::Neg(a)),
    }
}

fn call(f: Func, a: Arc<Node>) -> Arc<Node> {
    match a.constant() {
        Some(x) => num(f.eval(x)),
        None => Arc::new(Node::Call(f, a)),
    }
}

fn diff(node: &Arc<Node>) -> Arc<Node> {
    match node.as_ref() {
        Node::Num(_) => num(0.0),
        Node::Var => num(1.0),
        Node::Add(a, b) => add(diff(a), diff(b)),
        Node::Sub(a, b) => sub(diff(a), diff(b)),
        Node::Mul(a, b) => add(mul(diff(a), b.clone()), mul(a.clone(), diff(b))),
        Node::Div(a, b) => div(
            sub(mul(diff(a), b.clone()), mul(a.clone(), diff(b))),
            mul(b.clone(), b.clone()),
        ),
        Node::Pow(a, b) => {
            // general rule: (f^g)' = f^g (g' ln f + g f'/f); collapses to the
            // power rule for constant exponents
            if let Some(p) = b.constant() {
                mul(mul(num(p), pow(a.clone(), num(p - 1.0))), diff(a))
            } else {
                mul(
                    pow(a.clone(), b.clone()),
                    add(
                        mul(diff(b), call(Func::Ln, a.clone())),
                        mul(b.clone(), div(diff(a), a.clone())),
                    ),
                )
            }
        }
        Node::Neg(a) => neg(diff(a)),
        Node::Call(f, a) => {
            let inner = diff(a);
            let outer = match f {
                Func::Sinh => call(Func::Cosh, a.clone()),
                Func::Cosh => call(Func::Sinh, a.clone()),
                Func::Tanh => {
                    let t = call(Func::Tanh, a.clone());
                    sub(num(1.0), mul(t.clone(), t))
                }
                Func::Exp => call(Func::Exp, a.clone()),
                Func::Ln => div(num(1.0), a.clone()),
                Func::Sqrt => div(num(0.5), call(Func::Sqrt, a.clone())),
                Func::Sin => call(Func::Cos, a.clone()),
                Func::Cos => neg(call(Func::Sin, a.clone())),
                Func::Tan => {
                    let c = call(Func::Cos, a.clone());
                    div(num(1.0), mul(c.clone(), c))
                }
            };
            mul(outer, inner)
        }
    }
}

/// A parsed profile expression together with its first two symbolic
/// derivatives.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    f: Arc<Node>,
    d1: Arc<Node>,
    d2: Arc<Node>,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Expr {
    /// Parse `text` as an expression in the variable `r`.
    pub fn parse(text: &str) -> Result<Expr> {
        let mut p = Parser {
            bytes: text.as_bytes(),
            pos: 0,
        };
        p.skip_ws();
        let f = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(Error::Parse {
                at: p.pos,
                message: String::from("trailing input"),
            });
        }
        let d1 = diff(&f);
        let d2 = diff(&d1);
        Ok(Expr {
            source: String::from(text),
            f,
            d1,
            d2,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.f.eval(r)
    }

    pub fn eval_d1(&self, r: f64) -> f64 {
        self.d1.eval(r)
    }

    pub fn eval_d2(&self, r: f64) -> f64 {
        self.d2.eval(r)
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                at: self.pos,
                message: format!("expected '{}'", c as char),
            })
        }
    }

    fn expr(&mut self) -> Result<Arc<Node>> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = add(lhs, rhs);
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = sub(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Arc<Node>> {
        let mut lhs = self.unary()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = mul(lhs, rhs);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = div(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Arc<Node>> {
        self.skip_ws();
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(neg(inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Arc<Node>> {
        let base = self.atom()?;
        self.skip_ws();
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(pow(base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Arc<Node>> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.skip_ws();
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.name(),
            _ => Err(Error::Parse {
                at: self.pos,
                message: String::from("expected atom"),
            }),
        }
    }

    fn number(&mut self) -> Result<Arc<Node>> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                self.pos += 1;
                if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let text = core::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse::<f64>().map(num).map_err(|_| Error::Parse {
            at: start,
            message: format!("bad number '{text}'"),
        })
    }

    fn name(&mut self) -> Result<Arc<Node>> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphabetic() {
                self.pos += 1;
            } else {
                break;
            }
        }
        let word = core::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii letters");
        if word == "r" {
            return Ok(Arc::new(Node::Var));
        }
        if word == "pi" {
            return Ok(num(core::f64::consts::PI));
        }
        let f = match word {
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            _ => {
                return Err(Error::Parse {
                    at: start,
                    message: format!("unknown name '{word}'"),
                })
            }
        };
        self.skip_ws();
        self.expect(b'(')?;
        let inner = self.expr()?;
        self.skip_ws();
        self.expect(b')')?;
        Ok(call(f, inner))
    }
}
