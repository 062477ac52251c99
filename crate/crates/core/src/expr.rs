//! Polynomial expressions over state variables `x1..xn`: parsing, symbolic
//! differentiation, and real / interval evaluation.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary ('*' unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' integer)?
//! primary := number | 'x' integer | '(' expr ')'
//! number  := digits ('.' digits?)? (('e' | 'E') ('+' | '-')? digits)?
//! ```
//!
//! `-x1^2` parses as `-(x1^2)`. Variables are 1-based in text and 0-based in
//! the AST.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::interval::Interval;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn constant(&self) -> Option<f64> {
        match self {
            Expr::Const(v) => Some(*v),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.constant() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.constant() == Some(1.0)
    }

    // Smart constructors fold constants and drop neutral elements.

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.constant(), b.constant()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.constant(), b.constant()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::Const(0.0);
        }
        match (a.constant(), b.constant()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(v) => Expr::Const(-v),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn pow(a: Expr, k: u32) -> Expr {
        match (k, a.constant()) {
            (0, _) => Expr::Const(1.0),
            (1, _) => a,
            (_, Some(v)) => Expr::Const(v.powi(k as i32)),
            _ => Expr::Pow(Box::new(a), k),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Partial derivative with respect to variable `i` (0-based).
    pub fn differentiate(&self, i: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(j) => Expr::Const(if *j == i { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.differentiate(i)),
            Expr::Add(a, b) => Expr::add(a.differentiate(i), b.differentiate(i)),
            Expr::Sub(a, b) => Expr::sub(a.differentiate(i), b.differentiate(i)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.differentiate(i), (**b).clone()),
                Expr::mul((**a).clone(), b.differentiate(i)),
            ),
            Expr::Pow(_, 0) => Expr::Const(0.0),
            Expr::Pow(a, k) => Expr::mul(
                Expr::mul(Expr::Const(*k as f64), Expr::pow((**a).clone(), k - 1)),
                a.differentiate(i),
            ),
        }
    }

    pub fn eval_real(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval_real(x),
            Expr::Add(a, b) => a.eval_real(x) + b.eval_real(x),
            Expr::Sub(a, b) => a.eval_real(x) - b.eval_real(x),
            Expr::Mul(a, b) => a.eval_real(x) * b.eval_real(x),
            Expr::Pow(a, k) => a.eval_real(x).powi(*k as i32),
        }
    }

    /// Natural interval extension over a box.
    pub fn eval_interval(&self, bounds: &[Interval]) -> Interval {
        match self {
            Expr::Const(v) => Interval::point(*v),
            Expr::Var(i) => bounds[*i],
            Expr::Neg(a) => -a.eval_interval(bounds),
            Expr::Add(a, b) => a.eval_interval(bounds) + b.eval_interval(bounds),
            Expr::Sub(a, b) => a.eval_interval(bounds) - b.eval_interval(bounds),
            Expr::Mul(a, b) => a.eval_interval(bounds) * b.eval_interval(bounds),
            Expr::Pow(a, k) => a.eval_interval(bounds).powi(*k),
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized; re-parses to an equivalent tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) if *v < 0.0 => write!(f, "(-{})", -v),
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Pow(a, k) => write!(f, "({a}^{k})"),
        }
    }
}

/// Parses `text` as a polynomial in `x1..x{dim}`.
pub fn parse_expr(text: &str, dim: usize) -> Result<Expr> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, dim };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn error(&self, message: String) -> Error {
        Error::Syntax { pos: self.pos, message }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            let digits = self.digits();
            if digits.is_empty() {
                return Err(self.error("expected a nonnegative integer exponent".into()));
            }
            let k: u32 = digits.parse().map_err(|_| Error::Syntax { pos: start, message: "exponent too large".into() })?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                let index = name
                    .strip_prefix('x')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&k| k >= 1 && k <= self.dim);
                match index {
                    Some(k) => Ok(Expr::Var(k - 1)),
                    None => Err(Error::UnknownVariable { name, pos: start, dim: self.dim }),
                }
            }
            Some(c) => Err(self.error(format!("unexpected `{}`", c as char))),
            None => Err(self.error("unexpected end of input".into())),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let mut mantissa = self.digits();
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            mantissa.push('.');
            mantissa.push_str(&self.digits());
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            let mut exp = String::from("e");
            if let Some(&s) = self.src.get(self.pos).filter(|s| **s == b'+' || **s == b'-') {
                exp.push(s as char);
                self.pos += 1;
            }
            let d = self.digits();
            if d.is_empty() {
                self.pos = save;
            } else {
                mantissa.push_str(&exp);
                mantissa.push_str(&d);
            }
        }
        mantissa
            .parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| Error::Syntax { pos: start, message: format!("malformed number `{mantissa}`") })
    }
}

/// `x(t+1) = f(x(t)) + B u(t)` with polynomial `f`. Jacobian and half-Hessian
/// expressions are derived once at construction.
#[derive(Debug, Clone)]
pub struct NonlinearModel {
    f: Vec<Expr>,
    input_matrix: DMatrix<f64>,
    jacobian: Vec<Vec<Expr>>,
    half_hessian: Vec<Vec<Vec<Expr>>>,
    sources: Vec<String>,
}

impl NonlinearModel {
    pub fn new(f: Vec<Expr>, input_matrix: DMatrix<f64>) -> Result<Self> {
        let n = f.len();
        if input_matrix.nrows() != n {
            return Err(Error::DimensionMismatch { context: "input matrix rows", expected: n, found: input_matrix.nrows() });
        }
        if let Some(k) = f.iter().filter_map(|e| e.max_var()).max().filter(|&k| k >= n) {
            return Err(Error::IndexOutOfRange { index: k, dim: n });
        }
        let jacobian: Vec<Vec<Expr>> = f.iter().map(|fq| (0..n).map(|i| fq.differentiate(i)).collect()).collect();
        let half_hessian = jacobian
            .iter()
            .map(|row| {
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| match i.cmp(&j) {
                                std::cmp::Ordering::Less => row[i].differentiate(j),
                                std::cmp::Ordering::Equal => Expr::mul(Expr::Const(0.5), row[i].differentiate(i)),
                                std::cmp::Ordering::Greater => Expr::Const(0.0),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let sources = f.iter().map(|e| e.to_string()).collect();
        Ok(NonlinearModel { f, input_matrix, jacobian, half_hessian, sources })
    }

    /// Parses one expression per state component.
    pub fn parse(exprs: &[impl AsRef<str>], input_matrix: DMatrix<f64>) -> Result<Self> {
        let n = exprs.len();
        let f = exprs.iter().map(|s| parse_expr(s.as_ref(), n)).collect::<Result<Vec<_>>>()?;
        let mut model = Self::new(f, input_matrix)?;
        model.sources = exprs.iter().map(|s| s.as_ref().to_string()).collect();
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_matrix.ncols()
    }

    pub fn input_matrix(&self) -> &DMatrix<f64> {
        &self.input_matrix
    }

    pub fn components(&self) -> &[Expr] {
        &self.f
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    /// `f(x)` (without the input term).
    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.f.iter().map(|e| e.eval_real(x.as_slice())))
    }

    /// `f(x) + B u`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.eval(x) + &self.input_matrix * u
    }

    /// Jacobian `∂f_q/∂x_i` at `x` (row `q`, column `i`).
    pub fn jacobian_at(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |q, i| self.jacobian[q][i].eval_real(x.as_slice()))
    }

    /// Upper-triangular half-Hessian expressions of component `q`:
    /// `H_ii = ∂²f_q/(2∂x_i²)`, `H_ij = ∂²f_q/∂x_i∂x_j` for `i < j`, zero below.
    pub fn half_hessian(&self, q: usize) -> &[Vec<Expr>] {
        &self.half_hessian[q]
    }
}
