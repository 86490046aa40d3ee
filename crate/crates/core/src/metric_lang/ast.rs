use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A bound parameter: a real number or a constant vector of chart dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

pub type Params = BTreeMap<String, ParamValue>;

/// Whether the expression defines `F` or `F^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeclaredForm {
    #[serde(rename = "F")]
    F,
    #[serde(rename = "F_squared")]
    FSquared,
}

impl fmt::Display for DeclaredForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeclaredForm::F => f.write_str("F"),
            DeclaredForm::FSquared => f.write_str("F_squared"),
        }
    }
}

/// Operand of `dot` / `norm2`.
#[derive(Clone, Debug, PartialEq)]
pub enum VecOperand {
    X,
    Y,
    Param(String),
}

/// Reduced rational exponent `p/q`, `q > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rational {
    pub p: i64,
    pub q: i64,
}

impl Rational {
    pub fn new(p: i64, q: i64) -> Option<Self> {
        if q == 0 {
            return None;
        }
        let (p, q) = if q < 0 { (-p, -q) } else { (p, q) };
        let g = gcd(p.unsigned_abs(), q as u64) as i64;
        Some(Self { p: p / g, q: q / g })
    }

    pub fn is_half(&self) -> bool {
        self.p == 1 && self.q == 2
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Param(String),
    Local(String),
    Dot(VecOperand, VecOperand),
    Norm2(VecOperand),
    Sqrt(Box<Expr>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Rational),
}

impl Expr {
    /// Power node; `^(1/2)` becomes `sqrt`.
    pub fn pow(base: Expr, exponent: Rational) -> Expr {
        if exponent.is_half() {
            Expr::Sqrt(Box::new(base))
        } else {
            Expr::Pow(Box::new(base), exponent)
        }
    }

    /// Number of nodes, used to bound generated test trees.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Param(_) | Expr::Local(_) | Expr::Dot(..) | Expr::Norm2(_) => 1,
            Expr::Sqrt(e) | Expr::Neg(e) | Expr::Pow(e, _) => 1 + e.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }
}

/// Builders used by the built-in catalog.
pub mod build {
    use super::*;

    pub const X: VecOperand = VecOperand::X;
    pub const Y: VecOperand = VecOperand::Y;

    pub fn v(name: &str) -> VecOperand {
        VecOperand::Param(name.to_string())
    }
    pub fn num(c: f64) -> Expr {
        Expr::Num(c)
    }
    pub fn param(name: &str) -> Expr {
        Expr::Param(name.to_string())
    }
    pub fn local(name: &str) -> Expr {
        Expr::Local(name.to_string())
    }
    pub fn dot(a: VecOperand, b: VecOperand) -> Expr {
        Expr::Dot(a, b)
    }
    pub fn norm2(a: VecOperand) -> Expr {
        Expr::Norm2(a)
    }
    pub fn sqrt(e: Expr) -> Expr {
        Expr::Sqrt(Box::new(e))
    }
    pub fn neg(e: Expr) -> Expr {
        Expr::Neg(Box::new(e))
    }
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }
    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }
    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }
    pub fn powi(a: Expr, p: i64) -> Expr {
        Expr::pow(a, Rational::new(p, 1).expect("q = 1"))
    }
}

/// A parsed metric definition: scalar `let` bindings evaluated in order,
/// then the root expression.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricExpr {
    pub locals: Vec<(String, Expr)>,
    pub root: Expr,
    pub form: DeclaredForm,
    pub params: Params,
}

impl fmt::Display for VecOperand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VecOperand::X => f.write_str("x"),
            VecOperand::Y => f.write_str("y"),
            VecOperand::Param(name) => f.write_str(name),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Param(name) | Expr::Local(name) => f.write_str(name),
            Expr::Dot(a, b) => write!(f, "dot({a}, {b})"),
            Expr::Norm2(a) => write!(f, "norm2({a})"),
            Expr::Sqrt(e) => write!(f, "sqrt({e})"),
            Expr::Neg(e) => write!(f, "(-{})", Wrapped(e)),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(e, r) => {
                if r.q == 1 && r.p >= 0 {
                    write!(f, "{}^{}", Wrapped(e), r.p)
                } else {
                    write!(f, "{}^({}/{})", Wrapped(e), r.p, r.q)
                }
            }
        }
    }
}

/// Prints an operand so that it parses back as a single atom.
struct Wrapped<'a>(&'a Expr);

impl fmt::Display for Wrapped<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Pow(..) => write!(f, "({})", self.0),
            _ => write!(f, "{}", self.0),
        }
    }
}

impl fmt::Display for MetricExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, e) in &self.locals {
            writeln!(f, "let {name} = {e};")?;
        }
        write!(f, "{}", self.root)
    }
}
