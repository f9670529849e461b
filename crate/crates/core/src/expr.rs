//! Real-valued expressions over `x1..xn`.
//!
//! Grammar (coordinate mode):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' INT)?
//! base   := NUMBER | 'x' INT | '(' expr ')' | '-' base
//! ```
//!
//! Note that `-x1^2` parses as `(-x1)^2`, because unary minus binds inside
//! `base`. Write `0 - x1^2` or `-(x1^2)` for the negated square.
//!
//! Time mode additionally accepts the variable `t` and the functions `sin`,
//! `cos` and `exp`; it exists only for closed-form reference trajectories.
//! Fields that define sets never contain functions, so their gradients stay
//! polynomial or rational.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based variable index (`x1` is `Var(0)`; in time mode `t` is `Var(0)`).
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalError {
    DivisionByZero,
    NonFinite,
    UnknownVariable(usize),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::DivisionByZero => f.write_str("division by zero"),
            EvalError::NonFinite => f.write_str("non-finite value"),
            EvalError::UnknownVariable(i) => write!(f, "variable x{} is out of range", i + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based character column inside the expression text.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Coordinates,
    Time,
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        Parser::new(src, Mode::Coordinates).parse_all()
    }

    /// Parses a closed-form trajectory component in the variable `t`.
    pub fn parse_time(src: &str) -> Result<Expr, ParseError> {
        Parser::new(src, Mode::Time).parse_all()
    }

    // Simplifying constructors; used by differentiation and negation.

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            (Expr::Const(x), _) if *x == 0.0 => b,
            (_, Expr::Const(y)) if *y == 0.0 => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            (Expr::Const(x), _) if *x == 0.0 => Expr::neg(b),
            (_, Expr::Const(y)) if *y == 0.0 => a,
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            (Expr::Const(x), _) | (_, Expr::Const(x)) if *x == 0.0 => Expr::Const(0.0),
            (Expr::Const(x), _) if *x == 1.0 => b,
            (_, Expr::Const(y)) if *y == 1.0 => a,
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => Expr::Const(x / y),
            (_, Expr::Const(y)) if *y == 1.0 => a,
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, n: u32) -> Expr {
        match (n, &a) {
            (0, _) => Expr::Const(1.0),
            (1, _) => a,
            (_, Expr::Const(c)) => Expr::Const(c.powi(n as i32)),
            _ => Expr::Pow(Box::new(a), n),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = self.eval_raw(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn eval_raw(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => *x.get(*i).ok_or(EvalError::UnknownVariable(*i))?,
            Expr::Neg(a) => -a.eval_raw(x)?,
            Expr::Add(a, b) => a.eval_raw(x)? + b.eval_raw(x)?,
            Expr::Sub(a, b) => a.eval_raw(x)? - b.eval_raw(x)?,
            Expr::Mul(a, b) => a.eval_raw(x)? * b.eval_raw(x)?,
            Expr::Div(a, b) => {
                let d = b.eval_raw(x)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval_raw(x)? / d
            }
            Expr::Pow(a, n) => a.eval_raw(x)?.powi(*n as i32),
            Expr::Sin(a) => a.eval_raw(x)?.sin(),
            Expr::Cos(a) => a.eval_raw(x)?.cos(),
            Expr::Exp(a) => a.eval_raw(x)?.exp(),
        })
    }

    /// Exact symbolic partial derivative with respect to `Var(i)`.
    pub fn derivative(&self, i: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(j) => Expr::Const(if *j == i { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.derivative(i)),
            Expr::Add(a, b) => Expr::add(a.derivative(i), b.derivative(i)),
            Expr::Sub(a, b) => Expr::sub(a.derivative(i), b.derivative(i)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.derivative(i), (**b).clone()),
                Expr::mul((**a).clone(), b.derivative(i)),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = Expr::sub(
                    Expr::mul(a.derivative(i), (**b).clone()),
                    Expr::mul((**a).clone(), b.derivative(i)),
                );
                Expr::div(num, Expr::pow((**b).clone(), 2))
            }
            Expr::Pow(_, 0) => Expr::Const(0.0),
            Expr::Pow(a, n) => Expr::mul(
                Expr::mul(Expr::Const(*n as f64), Expr::pow((**a).clone(), n - 1)),
                a.derivative(i),
            ),
            Expr::Sin(a) => Expr::mul(Expr::Cos(a.clone()), a.derivative(i)),
            Expr::Cos(a) => Expr::neg(Expr::mul(Expr::Sin(a.clone()), a.derivative(i))),
            Expr::Exp(a) => Expr::mul(Expr::Exp(a.clone()), a.derivative(i)),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => {
                a.max_var()
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    pub fn has_functions(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) => true,
            Expr::Neg(a) | Expr::Pow(a, _) => a.has_functions(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.has_functions() || b.has_functions()
            }
        }
    }

    /// `(coefficients, offset)` when the expression is affine in `x1..x_dim`.
    pub fn affine(&self, dim: usize) -> Option<(Vec<f64>, f64)> {
        let zero = || vec![0.0; dim];
        match self {
            Expr::Const(c) => Some((zero(), *c)),
            Expr::Var(i) => {
                if *i >= dim {
                    return None;
                }
                let mut a = zero();
                a[*i] = 1.0;
                Some((a, 0.0))
            }
            Expr::Neg(a) => a
                .affine(dim)
                .map(|(c, o)| (c.iter().map(|v| -v).collect(), -o)),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let (ca, oa) = a.affine(dim)?;
                let (cb, ob) = b.affine(dim)?;
                let s = if matches!(self, Expr::Add(..)) {
                    1.0
                } else {
                    -1.0
                };
                Some((
                    ca.iter().zip(&cb).map(|(p, q)| p + s * q).collect(),
                    oa + s * ob,
                ))
            }
            Expr::Mul(a, b) => {
                let (ca, oa) = a.affine(dim)?;
                let (cb, ob) = b.affine(dim)?;
                let a_const = ca.iter().all(|v| *v == 0.0);
                let b_const = cb.iter().all(|v| *v == 0.0);
                if a_const {
                    Some((cb.iter().map(|v| v * oa).collect(), oa * ob))
                } else if b_const {
                    Some((ca.iter().map(|v| v * ob).collect(), oa * ob))
                } else {
                    None
                }
            }
            Expr::Div(a, b) => {
                let (ca, oa) = a.affine(dim)?;
                let (cb, ob) = b.affine(dim)?;
                if cb.iter().any(|v| *v != 0.0) || ob == 0.0 {
                    return None;
                }
                Some((ca.iter().map(|v| v / ob).collect(), oa / ob))
            }
            Expr::Pow(a, n) => match n {
                0 => Some((zero(), 1.0)),
                1 => a.affine(dim),
                _ => {
                    let (ca, oa) = a.affine(dim)?;
                    if ca.iter().all(|v| *v == 0.0) {
                        Some((zero(), oa.powi(*n as i32)))
                    } else {
                        None
                    }
                }
            },
            Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) => None,
        }
    }

    /// Canonical text in time mode (`Var(0)` printed as `t`).
    pub fn to_time_string(&self) -> String {
        let mut s = String::new();
        self.write_canonical(&mut s, Mode::Time);
        s
    }

    fn write_canonical(&self, out: &mut String, mode: Mode) {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    out.push_str(&format!("(-{})", -c));
                } else {
                    out.push_str(&format!("{}", c));
                }
            }
            Expr::Var(i) => match mode {
                Mode::Coordinates => out.push_str(&format!("x{}", i + 1)),
                Mode::Time => out.push('t'),
            },
            Expr::Neg(a) => {
                out.push_str("-(");
                a.write_canonical(out, mode);
                out.push(')');
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = match self {
                    Expr::Add(..) => " + ",
                    Expr::Sub(..) => " - ",
                    Expr::Mul(..) => " * ",
                    _ => " / ",
                };
                out.push('(');
                a.write_canonical(out, mode);
                out.push_str(op);
                b.write_canonical(out, mode);
                out.push(')');
            }
            Expr::Pow(a, n) => {
                out.push('(');
                a.write_canonical(out, mode);
                out.push_str(&format!(")^{}", n));
            }
            Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => {
                out.push_str(match self {
                    Expr::Sin(_) => "sin(",
                    Expr::Cos(_) => "cos(",
                    _ => "exp(",
                });
                a.write_canonical(out, mode);
                out.push(')');
            }
        }
    }
}

/// Canonical, fully parenthesised text that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_canonical(&mut s, Mode::Coordinates);
        f.write_str(&s)
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    mode: Mode,
    _src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, mode: Mode) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            mode,
            _src: src,
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            column: self.pos + 1,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn parse_all(mut self) -> Result<Expr, ParseError> {
        if self.peek().is_none() {
            return self.err("empty expression");
        }
        let e = self.expr()?;
        match self.peek() {
            None => Ok(e),
            Some(c) => self.err(format!("unexpected '{}'", c)),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                '+' => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                '-' => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(c) = self.peek() {
            match c {
                '*' => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                '/' => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            let digits = self.digits();
            if digits.is_empty() {
                self.pos = start;
                return self.err("expected a non-negative integer exponent after '^'");
            }
            let n: u32 = match digits.parse() {
                Ok(n) => n,
                Err(_) => {
                    self.pos = start;
                    return self.err("exponent too large");
                }
            };
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn digits(&mut self) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.get(self.pos) {
            if c.is_ascii_digit() {
                s.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        s
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let mut s = self.digits();
        if self.chars.get(self.pos) == Some(&'.') {
            self.pos += 1;
            s.push('.');
            s.push_str(&self.digits());
        }
        if matches!(self.chars.get(self.pos), Some('e') | Some('E')) {
            let save = self.pos;
            let mut exp = String::from("e");
            self.pos += 1;
            if let Some(&c) = self.chars.get(self.pos) {
                if c == '+' || c == '-' {
                    exp.push(c);
                    self.pos += 1;
                }
            }
            let d = self.digits();
            if d.is_empty() {
                self.pos = save;
            } else {
                exp.push_str(&d);
                s.push_str(&exp);
            }
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && s != "." => Ok(Expr::Const(v)),
            _ => {
                self.pos = start;
                self.err(format!("malformed number '{}'", s))
            }
        }
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let Some(c) = self.peek() else {
            return self.err("unexpected end of expression");
        };
        match c {
            '-' => {
                self.pos += 1;
                let inner = self.base()?;
                Ok(match inner {
                    Expr::Const(v) => Expr::Const(-v),
                    other => Expr::Neg(Box::new(other)),
                })
            }
            '(' => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            c if c.is_ascii_digit() || c == '.' => self.number(),
            c if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let mut ident = String::new();
                while let Some(&c) = self.chars.get(self.pos) {
                    if c.is_ascii_alphabetic() {
                        ident.push(c);
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                if ident == "x" {
                    let d = self.digits();
                    let idx: usize = d.parse().unwrap_or(0);
                    if idx == 0 {
                        self.pos = start;
                        return self.err("variables are written x1, x2, ... (1-indexed)");
                    }
                    return Ok(Expr::Var(idx - 1));
                }
                match (self.mode, ident.as_str()) {
                    (Mode::Time, "t") => Ok(Expr::Var(0)),
                    (Mode::Time, "sin" | "cos" | "exp") => {
                        if self.peek() != Some('(') {
                            return self.err(format!("expected '(' after {}", ident));
                        }
                        self.pos += 1;
                        let arg = self.expr()?;
                        if self.peek() != Some(')') {
                            return self.err("expected ')'");
                        }
                        self.pos += 1;
                        let arg = Box::new(arg);
                        Ok(match ident.as_str() {
                            "sin" => Expr::Sin(arg),
                            "cos" => Expr::Cos(arg),
                            _ => Expr::Exp(arg),
                        })
                    }
                    (Mode::Coordinates, "min" | "max") => {
                        self.pos = start;
                        self.err("min/max are not allowed in fields; combine sets with union or intersection instead")
                    }
                    _ => {
                        self.pos = start;
                        self.err(format!("unknown identifier '{}'", ident))
                    }
                }
            }
            other => self.err(format!("unexpected '{}'", other)),
        }
    }
}

/// A guard comparison `lhs - rhs <= 0` (or `< 0` when strict).
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub diff: Expr,
    pub strict: bool,
}

/// Parses `true`, or one or more comparisons joined by `&&`, each of the
/// form `expr op expr` with `op` one of `<=`, `<`, `>=`, `>`, `≤`, `≥`.
pub fn parse_guard(src: &str) -> Result<Vec<Comparison>, ParseError> {
    let trimmed = src.trim();
    if trimmed == "true" || trimmed.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut offset = 0usize;
    for part in src.split("&&") {
        let chars: Vec<char> = part.chars().collect();
        let mut found = None;
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let next = chars.get(i + 1).copied();
            let op = match (c, next) {
                ('<', Some('=')) => Some(("<=", 2)),
                ('>', Some('=')) => Some((">=", 2)),
                ('<', _) => Some(("<", 1)),
                ('>', _) => Some((">", 1)),
                ('≤', _) => Some(("<=", 1)),
                ('≥', _) => Some((">=", 1)),
                _ => None,
            };
            if let Some((op, len)) = op {
                found = Some((i, op, len));
                break;
            }
            i += 1;
        }
        let Some((at, op, len)) = found else {
            return Err(ParseError {
                column: offset + 1,
                message: "guard needs a comparison (<=, <, >=, >)".to_string(),
            });
        };
        let lhs_src: String = chars[..at].iter().collect();
        let rhs_src: String = chars[at + len..].iter().collect();
        let shift = |e: ParseError, by: usize| ParseError {
            column: e.column + by,
            message: e.message,
        };
        let lhs = Expr::parse(&lhs_src).map_err(|e| shift(e, offset))?;
        let rhs = Expr::parse(&rhs_src).map_err(|e| shift(e, offset + at + len))?;
        let (diff, strict) = match op {
            "<=" => (Expr::sub(lhs, rhs), false),
            "<" => (Expr::sub(lhs, rhs), true),
            ">=" => (Expr::sub(rhs, lhs), false),
            _ => (Expr::sub(rhs, lhs), true),
        };
        out.push(Comparison { diff, strict });
        offset += chars.len() + 2;
    }
    Ok(out)
}

/// Canonical guard text.
pub fn guard_to_string(guard: &[Comparison]) -> String {
    if guard.is_empty() {
        return "true".to_string();
    }
    let parts: Vec<String> = guard
        .iter()
        .map(|c| format!("{} {} 0", c.diff, if c.strict { "<" } else { "<=" }))
        .collect();
    parts.join(" && ")
}
