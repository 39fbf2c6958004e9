use std::fmt;
use std::ops;
use std::sync::Arc;

use thiserror::Error;

/// Evaluation failure inside an expression tree.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("invalid power: {base}^{exponent}")]
    InvalidPower { base: f64, exponent: f64 },
    #[error("coordinate index {index} outside point of length {len}")]
    MissingCoordinate { index: usize, len: usize },
}

#[derive(Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Expr),
    Add(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, f64),
    Exp(Expr),
    Log(Expr),
    Sin(Expr),
    Cos(Expr),
}

/// Immutable, cheaply clonable expression tree.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn node(n: Node) -> Self {
        Expr(Arc::new(n))
    }

    pub fn constant(c: f64) -> Self {
        Self::node(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// Coordinate symbol with the given chart index.
    pub fn var(index: usize) -> Self {
        Self::node(Node::Var(index))
    }

    pub fn kind(&self) -> &Node {
        &self.0
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn neg(&self) -> Self {
        match self.kind() {
            Node::Const(c) => Self::constant(-c),
            Node::Neg(a) => a.clone(),
            _ => Self::node(Node::Neg(self.clone())),
        }
    }

    pub fn add(&self, other: &Expr) -> Self {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Self::constant(a + b),
            (Some(a), _) if a == 0.0 => other.clone(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => Self::node(Node::Add(self.clone(), other.clone())),
        }
    }

    pub fn sub(&self, other: &Expr) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Expr) -> Self {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Self::constant(a * b),
            (Some(a), _) if a == 0.0 => Self::zero(),
            (_, Some(b)) if b == 0.0 => Self::zero(),
            (Some(a), _) if a == 1.0 => other.clone(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (Some(a), _) if a == -1.0 => other.neg(),
            (_, Some(b)) if b == -1.0 => self.neg(),
            _ => Self::node(Node::Mul(self.clone(), other.clone())),
        }
    }

    pub fn div(&self, other: &Expr) -> Self {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) if b != 0.0 => Self::constant(a / b),
            (Some(a), _) if a == 0.0 => Self::zero(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            _ => Self::node(Node::Div(self.clone(), other.clone())),
        }
    }

    pub fn powf(&self, k: f64) -> Self {
        if k == 0.0 {
            return Self::one();
        }
        if k == 1.0 {
            return self.clone();
        }
        if let Some(c) = self.as_const() {
            if let Ok(v) = pow_value(c, k) {
                return Self::constant(v);
            }
        }
        Self::node(Node::Pow(self.clone(), k))
    }

    pub fn exp(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.exp()),
            None => Self::node(Node::Exp(self.clone())),
        }
    }

    pub fn ln(&self) -> Self {
        match self.as_const() {
            Some(c) if c > 0.0 => Self::constant(c.ln()),
            _ => Self::node(Node::Log(self.clone())),
        }
    }

    pub fn sin(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.sin()),
            None => Self::node(Node::Sin(self.clone())),
        }
    }

    pub fn cos(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.cos()),
            None => Self::node(Node::Cos(self.clone())),
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self.kind() {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(a) | Node::Pow(a, _) | Node::Exp(a) | Node::Log(a) | Node::Sin(a) | Node::Cos(a) => {
                a.max_var()
            }
            Node::Add(a, b) | Node::Mul(a, b) | Node::Div(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, None) => x,
                (None, y) => y,
            },
        }
    }

    pub fn evaluate(&self, p: &[f64]) -> Result<f64, DomainError> {
        Ok(match self.kind() {
            Node::Const(c) => *c,
            Node::Var(i) => *p.get(*i).ok_or(DomainError::MissingCoordinate { index: *i, len: p.len() })?,
            Node::Neg(a) => -a.evaluate(p)?,
            Node::Add(a, b) => a.evaluate(p)? + b.evaluate(p)?,
            Node::Mul(a, b) => a.evaluate(p)? * b.evaluate(p)?,
            Node::Div(a, b) => {
                let d = b.evaluate(p)?;
                if d == 0.0 {
                    return Err(DomainError::DivisionByZero);
                }
                a.evaluate(p)? / d
            }
            Node::Pow(a, k) => pow_value(a.evaluate(p)?, *k)?,
            Node::Exp(a) => a.evaluate(p)?.exp(),
            Node::Log(a) => {
                let v = a.evaluate(p)?;
                if v <= 0.0 {
                    return Err(DomainError::LogNonPositive(v));
                }
                v.ln()
            }
            Node::Sin(a) => a.evaluate(p)?.sin(),
            Node::Cos(a) => a.evaluate(p)?.cos(),
        })
    }

    /// Exact partial derivative with respect to coordinate `i`.
    pub fn differentiate(&self, i: usize) -> Expr {
        match self.kind() {
            Node::Const(_) => Self::zero(),
            Node::Var(j) => Self::constant(if *j == i { 1.0 } else { 0.0 }),
            Node::Neg(a) => a.differentiate(i).neg(),
            Node::Add(a, b) => a.differentiate(i).add(&b.differentiate(i)),
            Node::Mul(a, b) => a.differentiate(i).mul(b).add(&a.mul(&b.differentiate(i))),
            Node::Div(a, b) => {
                let da = a.differentiate(i);
                let db = b.differentiate(i);
                da.div(b).sub(&a.mul(&db).div(&b.powf(2.0)))
            }
            Node::Pow(a, k) => Self::constant(*k).mul(&a.powf(k - 1.0)).mul(&a.differentiate(i)),
            Node::Exp(a) => self.mul(&a.differentiate(i)),
            Node::Log(a) => a.differentiate(i).div(a),
            Node::Sin(a) => a.cos().mul(&a.differentiate(i)),
            Node::Cos(a) => a.sin().neg().mul(&a.differentiate(i)),
        }
    }

    /// Replaces every coordinate `i` by `values[i]`.
    pub fn substitute(&self, values: &[Expr]) -> Expr {
        match self.kind() {
            Node::Const(_) => self.clone(),
            Node::Var(i) => values.get(*i).cloned().unwrap_or_else(|| self.clone()),
            Node::Neg(a) => a.substitute(values).neg(),
            Node::Add(a, b) => a.substitute(values).add(&b.substitute(values)),
            Node::Mul(a, b) => a.substitute(values).mul(&b.substitute(values)),
            Node::Div(a, b) => a.substitute(values).div(&b.substitute(values)),
            Node::Pow(a, k) => a.substitute(values).powf(*k),
            Node::Exp(a) => a.substitute(values).exp(),
            Node::Log(a) => a.substitute(values).ln(),
            Node::Sin(a) => a.substitute(values).sin(),
            Node::Cos(a) => a.substitute(values).cos(),
        }
    }

    /// Renders the tree using the given coordinate names.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> Display<'a> {
        Display { expr: self, names: Some(names) }
    }
}

fn pow_value(base: f64, k: f64) -> Result<f64, DomainError> {
    if k.fract() == 0.0 && k.abs() <= 64.0 {
        if base == 0.0 && k < 0.0 {
            return Err(DomainError::InvalidPower { base, exponent: k });
        }
        return Ok(base.powi(k as i32));
    }
    if base > 0.0 {
        Ok((k * base.ln()).exp())
    } else if base == 0.0 && k > 0.0 {
        Ok(0.0)
    } else {
        Err(DomainError::InvalidPower { base, exponent: k })
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $f:ident) => {
        impl ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$f(&self, &rhs)
            }
        }
        impl ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::$f(self, rhs)
            }
        }
        impl ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                Expr::$f(&self, &Expr::constant(rhs))
            }
        }
        impl ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$f(&Expr::constant(self), &rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

pub struct Display<'a> {
    expr: &'a Expr,
    names: Option<&'a [String]>,
}

impl Display<'_> {
    fn sub<'b>(&'b self, e: &'b Expr) -> Display<'b> {
        Display { expr: e, names: self.names }
    }
}

fn prec(n: &Node) -> u8 {
    match n {
        Node::Add(..) => 1,
        Node::Neg(_) => 2,
        Node::Mul(..) | Node::Div(..) => 3,
        Node::Pow(..) => 4,
        Node::Const(c) if *c < 0.0 => 2,
        _ => 5,
    }
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if prec(e.kind()) < min {
                write!(f, "({})", self.sub(e))
            } else {
                write!(f, "{}", self.sub(e))
            }
        };
        match self.expr.kind() {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(i) => match self.names.and_then(|n| n.get(*i)) {
                Some(name) => write!(f, "{name}"),
                None => write!(f, "x{}", i + 1),
            },
            Node::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 3)
            }
            Node::Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Node::Mul(a, b) => {
                wrap(f, a, 3)?;
                write!(f, "*")?;
                wrap(f, b, 4)
            }
            Node::Div(a, b) => {
                wrap(f, a, 3)?;
                write!(f, "/")?;
                wrap(f, b, 4)
            }
            Node::Pow(a, k) => {
                wrap(f, a, 5)?;
                if *k < 0.0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Node::Exp(a) => write!(f, "exp({})", self.sub(a)),
            Node::Log(a) => write!(f, "log({})", self.sub(a)),
            Node::Sin(a) => write!(f, "sin({})", self.sub(a)),
            Node::Cos(a) => write!(f, "cos({})", self.sub(a)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Display { expr: self, names: None }.fmt(f)
    }
}
