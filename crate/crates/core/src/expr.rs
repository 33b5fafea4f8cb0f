//! A small arithmetic expression language for boundary data.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom (('^' | '**') unary)?
//! atom   := number | 'pi' | 'e' | 'x1'..'xm' | 't'
//!         | func '(' expr (',' expr)* ')' | '(' expr ')'
//! func   := sin cos exp log tanh sqrt abs min max
//! ```

use thiserror::Error;

use crate::function::VectorFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown identifier '{0}'")]
    UnknownIdent(String),
    #[error("variable x{index} outside declared dimension {m}")]
    VariableOutOfRange { index: usize, m: usize },
    #[error("function {name} takes {expected} argument(s), got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("expected {expected} expressions, got {got}")]
    Count { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Tanh,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based spatial coordinate.
    Var(usize),
    Time,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    /// Parses `src`, accepting variables `x1..xm` and `t`.
    pub fn parse(src: &str, m: usize) -> Result<Expr, ExprError> {
        let mut p = Parser { src, pos: 0, m };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Time => t,
            Expr::Neg(a) => -a.eval(x, t),
            Expr::Add(a, b) => a.eval(x, t) + b.eval(x, t),
            Expr::Sub(a, b) => a.eval(x, t) - b.eval(x, t),
            Expr::Mul(a, b) => a.eval(x, t) * b.eval(x, t),
            Expr::Div(a, b) => a.eval(x, t) / b.eval(x, t),
            Expr::Pow(a, b) => {
                let (base, ex) = (a.eval(x, t), b.eval(x, t));
                if ex.fract() == 0.0 && ex.abs() <= 64.0 {
                    base.powi(ex as i32)
                } else {
                    base.powf(ex)
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(x, t);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Tanh => a.tanh(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => a.abs(),
                    Func::Min => a.min(args[1].eval(x, t)),
                    Func::Max => a.max(args[1].eval(x, t)),
                }
            }
        }
    }

    pub fn uses_time(&self) -> bool {
        match self {
            Expr::Time => true,
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Neg(a) => a.uses_time(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.uses_time() || b.uses_time()
            }
            Expr::Call(_, args) => args.iter().any(Expr::uses_time),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    m: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat("+") {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat("-") {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            self.skip_ws();
            if self.src[self.pos..].starts_with("**") {
                return Ok(lhs);
            }
            if self.eat("*") {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat("/") {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat("+") {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat("^") || self.eat("**") {
            let ex = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(ex)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(")") {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let rest = &self.src[self.pos..];
                let mut end = 0;
                let bytes = rest.as_bytes();
                while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                    end += 1;
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut k = end + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        end = k;
                    }
                }
                let v: f64 = rest[..end].parse().map_err(|_| self.err("malformed number"))?;
                self.pos += end;
                Ok(Expr::Const(v))
            }
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let rest = &self.src[self.pos..];
                let end = rest
                    .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                    .unwrap_or(rest.len());
                let name = &rest[..end];
                self.pos += end;
                if let Some(f) = Func::from_name(name) {
                    if !self.eat("(") {
                        return Err(self.err("expected '(' after function name"));
                    }
                    let mut args = vec![self.expr()?];
                    while self.eat(",") {
                        args.push(self.expr()?);
                    }
                    if !self.eat(")") {
                        return Err(self.err("expected ')'"));
                    }
                    if args.len() != f.arity() {
                        return Err(ExprError::Arity {
                            name: name.to_string(),
                            expected: f.arity(),
                            got: args.len(),
                        });
                    }
                    return Ok(Expr::Call(f, args));
                }
                match name {
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    "e" => Ok(Expr::Const(std::f64::consts::E)),
                    "t" => Ok(Expr::Time),
                    _ => {
                        if let Some(idx) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                            if idx == 0 || idx > self.m {
                                return Err(ExprError::VariableOutOfRange { index: idx, m: self.m });
                            }
                            Ok(Expr::Var(idx - 1))
                        } else {
                            self.pos = start;
                            Err(ExprError::UnknownIdent(name.to_string()))
                        }
                    }
                }
            }
            Some(_) => Err(self.err("unexpected character")),
        }
    }
}

/// A vector field given by `n` expressions in `x1..xm` and `t`.
#[derive(Debug, Clone)]
pub struct ExprField {
    m: usize,
    sources: Vec<String>,
    exprs: Vec<Expr>,
}

impl ExprField {
    pub fn parse<S: AsRef<str>>(m: usize, sources: &[S]) -> Result<Self, ExprError> {
        let exprs = sources
            .iter()
            .map(|s| Expr::parse(s.as_ref(), m))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExprField {
            m,
            sources: sources.iter().map(|s| s.as_ref().to_string()).collect(),
            exprs,
        })
    }

    /// Like [`ExprField::parse`] but also checks the component count.
    pub fn parse_n<S: AsRef<str>>(m: usize, n: usize, sources: &[S]) -> Result<Self, ExprError> {
        if sources.len() != n {
            return Err(ExprError::Count {
                expected: n,
                got: sources.len(),
            });
        }
        Self::parse(m, sources)
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }
}

impl VectorFunction for ExprField {
    fn dim_in(&self) -> usize {
        self.m
    }

    fn dim_out(&self) -> usize {
        self.exprs.len()
    }

    fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.exprs.iter().map(|e| e.eval(x, t)).collect()
    }

    fn is_time_dependent(&self) -> bool {
        self.exprs.iter().any(Expr::uses_time)
    }
}
