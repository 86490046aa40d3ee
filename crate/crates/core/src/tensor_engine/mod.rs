//! Curvature tensors of sprays and Finsler metrics, evaluated at a point from
//! jets of `F^2` so that every x- and y-derivative stays exact to truncation.
//!
//! Index convention: the up index comes first, followed by the down indices
//! in written order, so `B_j^i_kl` is stored as `[i, j, k, l]`.

mod geodesic;
mod geometry;
mod tensor;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

pub use geodesic::{integrate_geodesic, GeodesicError, GeodesicSample};
pub use geometry::{spray_at, Geometry, IdentityResiduals, MetricSource, Residual, SpraySource};
pub use tensor::{JetTensor, Tensor, TensorValue, Variance};

use crate::jets::{JetError, JetSpec};
use crate::metric_lang::EvalError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EngineError {
    #[error("fundamental tensor is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("{0} has non-finite components")]
    NonFinite(&'static str),
    #[error("jet budget {spec} is too small for {tensor}")]
    InsufficientOrder { tensor: &'static str, spec: JetSpec },
    #[error("point lies outside the chart domain")]
    OutsideDomain,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("{0} needs a metric, but the source is a bare spray")]
    NoMetric(&'static str),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Tensors exposed by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TensorId {
    Fundamental,
    Cartan,
    Spray,
    Connection,
    Berwald,
    MeanBerwald,
    HCurvature,
    Douglas,
    Riemann,
    RiemannFull,
    Landsberg,
    Wtilde,
    Angular,
}

impl TensorId {
    pub const ALL: [TensorId; 13] = [
        TensorId::Fundamental,
        TensorId::Cartan,
        TensorId::Spray,
        TensorId::Connection,
        TensorId::Berwald,
        TensorId::MeanBerwald,
        TensorId::HCurvature,
        TensorId::Douglas,
        TensorId::Riemann,
        TensorId::RiemannFull,
        TensorId::Landsberg,
        TensorId::Wtilde,
        TensorId::Angular,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            TensorId::Fundamental => "g",
            TensorId::Cartan => "C",
            TensorId::Spray => "G",
            TensorId::Connection => "N",
            TensorId::Berwald => "B",
            TensorId::MeanBerwald => "E",
            TensorId::HCurvature => "H",
            TensorId::Douglas => "D",
            TensorId::Riemann => "R",
            TensorId::RiemannFull => "Rfull",
            TensorId::Landsberg => "L",
            TensorId::Wtilde => "Wtilde",
            TensorId::Angular => "h",
        }
    }

    pub fn y_degree(self) -> i32 {
        match self {
            TensorId::Fundamental | TensorId::Angular => 0,
            TensorId::Cartan => -1,
            TensorId::Spray => 2,
            TensorId::Connection => 1,
            TensorId::Berwald | TensorId::MeanBerwald | TensorId::Douglas => -1,
            TensorId::HCurvature | TensorId::RiemannFull | TensorId::Landsberg => 0,
            TensorId::Riemann | TensorId::Wtilde => 2,
        }
    }

    /// Smallest `F^2` jet budget `(kx, ky)` from which the engine produces
    /// the tensor's value.
    pub fn required_orders(self) -> (usize, usize) {
        match self {
            TensorId::Fundamental | TensorId::Angular => (0, 2),
            TensorId::Cartan => (0, 3),
            TensorId::Spray => (1, 2),
            TensorId::Connection => (1, 3),
            TensorId::Berwald | TensorId::MeanBerwald | TensorId::Landsberg => (1, 5),
            TensorId::Douglas => (1, 6),
            TensorId::Riemann => (2, 4),
            TensorId::RiemannFull | TensorId::HCurvature => (2, 6),
            TensorId::Wtilde => (2, 7),
        }
    }
}

impl fmt::Display for TensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for TensorId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        TensorId::ALL
            .into_iter()
            .find(|t| t.symbol() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = TensorId::ALL.iter().map(|t| t.symbol()).collect();
                format!("unknown tensor `{s}` (known: {})", known.join(", "))
            })
    }
}

#[cfg(test)]
mod tests;
