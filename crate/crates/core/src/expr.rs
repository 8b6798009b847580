//! A small closed-form expression language for potentials.
//!
//! Grammar: `+ - * / ^`, parentheses, `sin cos exp sqrt ln`, the constant
//! `pi`, variables `t`, `rho` (or `ρ`), `x` / `r` (first coordinate), `x1`,
//! `x2`, and the bracket `<x>` (also `<r>`) for `sqrt(1 + |x|^2)`.
//! Expressions can be differentiated symbolically in any variable.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    Rho,
    X(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Ln,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Evaluation point.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env {
    pub t: f64,
    pub rho: f64,
    pub x: [f64; 2],
}

impl Env {
    pub fn new(t: f64, rho: f64, x: [f64; 2]) -> Self {
        Self { t, rho, x }
    }
}

fn c(v: f64) -> Expr {
    Expr::Const(v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => c(x + y),
        (Expr::Const(z), _) if *z == 0.0 => b,
        (_, Expr::Const(z)) if *z == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => c(x - y),
        (_, Expr::Const(z)) if *z == 0.0 => a,
        (Expr::Const(z), _) if *z == 0.0 => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(x) => c(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => c(x * y),
        (Expr::Const(z), _) | (_, Expr::Const(z)) if *z == 0.0 => c(0.0),
        (Expr::Const(o), _) if *o == 1.0 => b,
        (_, Expr::Const(o)) if *o == 1.0 => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => c(x / y),
        (Expr::Const(z), _) if *z == 0.0 => c(0.0),
        (_, Expr::Const(o)) if *o == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => c(x.powf(*y)),
        (_, Expr::Const(z)) if *z == 0.0 => c(1.0),
        (_, Expr::Const(o)) if *o == 1.0 => a,
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match a {
        Expr::Const(v) => c(f.apply(v)),
        other => Expr::Call(f, Box::new(other)),
    }
}

impl Func {
    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Ln => v.ln(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
        }
    }
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        c(v)
    }

    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, dim };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expr(format!("unexpected trailing input in `{src}`")));
        }
        Ok(e)
    }

    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Var(Var::T) => env.t,
            Expr::Var(Var::Rho) => env.rho,
            Expr::Var(Var::X(i)) => env.x[*i],
            Expr::Neg(a) => -a.eval(env),
            Expr::Add(a, b) => a.eval(env) + b.eval(env),
            Expr::Sub(a, b) => a.eval(env) - b.eval(env),
            Expr::Mul(a, b) => a.eval(env) * b.eval(env),
            Expr::Div(a, b) => a.eval(env) / b.eval(env),
            Expr::Pow(a, b) => {
                let base = a.eval(env);
                match b.as_ref() {
                    Expr::Const(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(*e as i32),
                    other => base.powf(other.eval(env)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(env)),
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(z) if *z == 0.0)
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, v: Var) -> Expr {
        if !self.depends_on(v) {
            return c(0.0);
        }
        match self {
            Expr::Const(_) => c(0.0),
            Expr::Var(w) => c(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(v)),
            Expr::Add(a, b) => add(a.diff(v), b.diff(v)),
            Expr::Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Expr::Mul(a, b) => add(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
            Expr::Div(a, b) => div(
                sub(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
                pow((**b).clone(), c(2.0)),
            ),
            Expr::Pow(a, b) => {
                if !b.depends_on(v) {
                    // d(a^k) = k a^(k-1) a'
                    mul(
                        mul((**b).clone(), pow((**a).clone(), sub((**b).clone(), c(1.0)))),
                        a.diff(v),
                    )
                } else {
                    // a^b (b' ln a + b a' / a)
                    mul(
                        self.clone(),
                        add(
                            mul(b.diff(v), call(Func::Ln, (**a).clone())),
                            div(mul((**b).clone(), a.diff(v)), (**a).clone()),
                        ),
                    )
                }
            }
            Expr::Call(f, a) => {
                let inner = a.diff(v);
                let outer = match f {
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Exp => self.clone(),
                    Func::Sqrt => div(c(0.5), self.clone()),
                    Func::Ln => div(c(1.0), (**a).clone()),
                };
                mul(outer, inner)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Var(Var::Rho) => write!(f, "rho"),
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a}^{b})"),
            Expr::Call(fun, a) => write!(f, "{}({a})", fun.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Bracket(String),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        match ch {
            ' ' | '\t' | '\n' => i += 1,
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<f64>().map_err(|_| Error::Expr(format!("bad number `{s}`")))?;
                out.push(Tok::Num(v));
            }
            '+' | '-' | '*' | '/' | '^' => {
                out.push(Tok::Op(ch));
                i += 1;
            }
            '×' | '·' => {
                out.push(Tok::Op('*'));
                i += 1;
            }
            '−' => {
                out.push(Tok::Op('-'));
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            '<' => {
                let close = chars[i..]
                    .iter()
                    .position(|&c| c == '>')
                    .ok_or_else(|| Error::Expr("unclosed `<`".into()))?;
                let name: String = chars[i + 1..i + close].iter().collect::<String>().trim().to_string();
                out.push(Tok::Bracket(name));
                i += close + 1;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Expr(format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().cloned() {
                Some(Tok::Op(op @ ('*' | '/'))) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = if op == '*' {
                        Expr::Mul(Box::new(lhs), Box::new(rhs))
                    } else {
                        Expr::Div(Box::new(lhs), Box::new(rhs))
                    };
                }
                // implicit multiplication: `2x`, `2(1+x)`, `(a)(b)`
                Some(Tok::Num(_) | Tok::Ident(_) | Tok::LParen | Tok::Bracket(_)) => {
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn bracket(&self) -> Expr {
        let mut r2 = c(1.0);
        for i in 0..self.dim {
            r2 = Expr::Add(
                Box::new(r2),
                Box::new(Expr::Pow(Box::new(Expr::Var(Var::X(i))), Box::new(c(2.0)))),
            );
        }
        Expr::Call(Func::Sqrt, Box::new(r2))
    }

    fn variable(&self, name: &str) -> Result<Expr> {
        let v = match name {
            "t" => Var::T,
            "rho" | "ρ" => Var::Rho,
            "x" | "r" | "x1" => Var::X(0),
            "x2" if self.dim >= 2 => Var::X(1),
            "pi" => return Ok(c(std::f64::consts::PI)),
            other => return Err(Error::Expr(format!("unknown identifier `{other}`"))),
        };
        Ok(Expr::Var(v))
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(c(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(e),
                    _ => Err(Error::Expr("missing `)`".into())),
                }
            }
            Some(Tok::Bracket(name)) => match name.as_str() {
                "x" | "r" => Ok(self.bracket()),
                other => Err(Error::Expr(format!("unknown bracket `<{other}>`"))),
            },
            Some(Tok::Ident(name)) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    "sqrt" => Some(Func::Sqrt),
                    "ln" => Some(Func::Ln),
                    _ => None,
                };
                match func {
                    Some(f) => {
                        if self.next() != Some(Tok::LParen) {
                            return Err(Error::Expr(format!("expected `(` after `{name}`")));
                        }
                        let arg = self.expr()?;
                        if self.next() != Some(Tok::RParen) {
                            return Err(Error::Expr(format!("missing `)` after `{name}(`")));
                        }
                        Ok(Expr::Call(f, Box::new(arg)))
                    }
                    None => self.variable(&name),
                }
            }
            Some(tok) => Err(Error::Expr(format!("unexpected token {tok:?}"))),
            None => Err(Error::Expr("unexpected end of expression".into())),
        }
    }
}
