use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use super::ast::{DeclaredForm, Expr, MetricExpr, ParamValue, VecOperand};
use crate::jets::{Coordinate, Jet, JetError, JetSpec, Point, Scalar};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("domain violation in `{subexpr}`: {source}")]
    Domain { subexpr: String, source: JetError },
    #[error("parameter `{name}` has length {found}, chart dimension is {expected}")]
    ParamDimension {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("invalid evaluation point: {0}")]
    Point(JetError),
}

struct Env<'a, S> {
    expr: &'a MetricExpr,
    x: &'a [S],
    y: &'a [S],
    locals: HashMap<&'a str, S>,
}

impl<'a, S: Scalar> Env<'a, S> {
    fn vector(&self, op: &VecOperand) -> Result<VecValue<'a, '_, S>, EvalError> {
        match op {
            VecOperand::X => Ok(VecValue::Field(self.x)),
            VecOperand::Y => Ok(VecValue::Field(self.y)),
            VecOperand::Param(name) => match self.expr.params.get(name) {
                Some(ParamValue::Vector(v)) => {
                    if v.len() != self.x.len() {
                        return Err(EvalError::ParamDimension {
                            name: name.clone(),
                            expected: self.x.len(),
                            found: v.len(),
                        });
                    }
                    Ok(VecValue::Const(v))
                }
                _ => Err(EvalError::Unbound(name.clone())),
            },
        }
    }

    fn dot(&self, a: &VecOperand, b: &VecOperand) -> Result<S, EvalError> {
        let zero = self.x[0].constant_like(0.0);
        let (va, vb) = (self.vector(a)?, self.vector(b)?);
        let mut acc: Option<S> = None;
        let mut constant = 0.0;
        for i in 0..self.x.len() {
            match (&va, &vb) {
                (VecValue::Field(p), VecValue::Field(q)) => {
                    let t = p[i].mul(&q[i]);
                    acc = Some(match acc {
                        Some(s) => s.add(&t),
                        None => t,
                    });
                }
                (VecValue::Field(p), VecValue::Const(c)) | (VecValue::Const(c), VecValue::Field(p)) => {
                    let t = p[i].scale(c[i]);
                    acc = Some(match acc {
                        Some(s) => s.add(&t),
                        None => t,
                    });
                }
                (VecValue::Const(c), VecValue::Const(d)) => constant += c[i] * d[i],
            }
        }
        Ok(match acc {
            Some(s) if constant != 0.0 => s.add(&zero.constant_like(constant)),
            Some(s) => s,
            None => zero.constant_like(constant),
        })
    }

    fn eval(&self, e: &Expr) -> Result<S, EvalError> {
        let domain = |source: JetError| EvalError::Domain {
            subexpr: e.to_string(),
            source,
        };
        Ok(match e {
            Expr::Num(v) => self.x[0].constant_like(*v),
            Expr::Param(name) => match self.expr.params.get(name) {
                Some(ParamValue::Scalar(v)) => self.x[0].constant_like(*v),
                _ => return Err(EvalError::Unbound(name.clone())),
            },
            Expr::Local(name) => self
                .locals
                .get(name.as_str())
                .cloned()
                .ok_or_else(|| EvalError::Unbound(name.clone()))?,
            Expr::Dot(a, b) => self.dot(a, b)?,
            Expr::Norm2(a) => self.dot(a, a)?,
            Expr::Sqrt(a) => self.eval(a)?.sqrt().map_err(domain)?,
            Expr::Neg(a) => self.eval(a)?.neg(),
            Expr::Add(a, b) => self.eval(a)?.add(&self.eval(b)?),
            Expr::Sub(a, b) => self.eval(a)?.sub(&self.eval(b)?),
            Expr::Mul(a, b) => self.eval(a)?.mul(&self.eval(b)?),
            Expr::Div(a, b) => self.eval(a)?.div(&self.eval(b)?).map_err(domain)?,
            Expr::Pow(a, r) => self.eval(a)?.powr(r.p, r.q).map_err(domain)?,
        })
    }
}

enum VecValue<'a, 'b, S> {
    Field(&'b [S]),
    Const(&'a [f64]),
}

/// Evaluates the root expression (`F` or `F^2` as declared) on any scalar type.
pub fn eval_root<S: Scalar>(expr: &MetricExpr, x: &[S], y: &[S]) -> Result<S, EvalError> {
    if x.is_empty() || x.len() != y.len() {
        return Err(EvalError::Point(JetError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        }));
    }
    let mut env = Env {
        expr,
        x,
        y,
        locals: HashMap::new(),
    };
    for (name, e) in &expr.locals {
        let v = env.eval(e)?;
        env.locals.insert(name.as_str(), v);
    }
    env.eval(&expr.root)
}

/// Evaluates `F^2`, squaring when the expression declares `F`.
pub fn eval_f2<S: Scalar>(expr: &MetricExpr, x: &[S], y: &[S]) -> Result<S, EvalError> {
    let root = eval_root(expr, x, y)?;
    Ok(match expr.form {
        DeclaredForm::FSquared => root,
        DeclaredForm::F => root.mul(&root),
    })
}

/// Evaluates `F` at a plain point.
pub fn eval_f(expr: &MetricExpr, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    let root = eval_root(expr, x, y)?;
    match expr.form {
        DeclaredForm::F => Ok(root),
        DeclaredForm::FSquared => Scalar::sqrt(&root).map_err(|source| EvalError::Domain {
            subexpr: format!("sqrt of F^2 = {}", expr.root),
            source,
        }),
    }
}

/// Coordinate jets `(x, y)` at `base`.
pub fn coordinate_jets(spec: JetSpec, base: &Point) -> Result<(Vec<Jet>, Vec<Jet>), JetError> {
    base.check_admissible()?;
    let shared = Arc::new(base.clone());
    let xs = (0..spec.dim)
        .map(|i| Jet::lift(spec, shared.clone(), Coordinate::X(i)))
        .collect::<Result<_, _>>()?;
    let ys = (0..spec.dim)
        .map(|i| Jet::lift(spec, shared.clone(), Coordinate::Y(i)))
        .collect::<Result<_, _>>()?;
    Ok((xs, ys))
}

/// Jet of `F^2` at `base`.
pub fn eval_as_jet(expr: &MetricExpr, spec: JetSpec, base: &Point) -> Result<Jet, EvalError> {
    let (xs, ys) = coordinate_jets(spec, base).map_err(EvalError::Point)?;
    eval_f2(expr, &xs, &ys)
}
