//! Small expression language for Finsler metrics over `x`, `y`, parameters,
//! `dot`, `norm2`, `sqrt`, arithmetic and rational powers.

mod ast;
mod eval;
mod parser;

use serde::Serialize;

pub use ast::{build, DeclaredForm, Expr, MetricExpr, ParamValue, Params, Rational, VecOperand};
pub use eval::{coordinate_jets, eval_as_jet, eval_f, eval_f2, eval_root, EvalError};
pub use parser::{parse, ParseError, ParseErrorKind};

use crate::jets::Point;

/// Scale factors at which positive 1-homogeneity is probed.
pub const HOMOGENEITY_SCALES: [f64; 3] = [0.5, 2.0, 3.0];

#[derive(Debug, Clone, Serialize)]
pub struct HomogeneityReport {
    pub max_residual: f64,
    pub worst_sample: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Max over samples and `lambda` of `|F(x, lambda y) - lambda F(x, y)| / (lambda F(x, y))`.
pub fn check_homogeneity(
    expr: &MetricExpr,
    samples: &[Point],
    tol: f64,
) -> Result<HomogeneityReport, EvalError> {
    let mut worst = (0.0f64, 0usize);
    for (k, p) in samples.iter().enumerate() {
        let f = eval_f(expr, &p.x, &p.y)?;
        for &lambda in &HOMOGENEITY_SCALES {
            let scaled: Vec<f64> = p.y.iter().map(|v| lambda * v).collect();
            let fl = eval_f(expr, &p.x, &scaled)?;
            let r = (fl - lambda * f).abs() / (lambda * f).abs();
            if r > worst.0 || r.is_nan() {
                worst = (r, k);
            }
        }
    }
    Ok(HomogeneityReport {
        max_residual: worst.0,
        worst_sample: worst.1,
        tol,
        passed: worst.0 < tol,
    })
}

#[cfg(test)]
mod tests;
