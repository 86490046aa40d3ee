//! Truncated multivariate Taylor arithmetic ("jets") over the tangent bundle
//! coordinates `(x, y)`.
//!
//! A [`Jet`] carries every mixed partial derivative of a scalar field up to a
//! rectangular budget [`JetSpec`] (x-order `kx`, y-order `ky`). Sums,
//! products, quotients, square roots and rational powers are exact up to
//! truncation, and [`Jet::dx`] / [`Jet::dy`] differentiate the represented
//! polynomial, so derived fields keep their own derivatives.

mod jet;
mod multi_index;
mod scalar;

use thiserror::Error;

pub use jet::{div_meet, Coordinate, Jet, JetSpec, Point};
pub use scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("dimension must be positive, got {0}")]
    InvalidDimension(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("velocity y must be nonzero")]
    ZeroVelocity,
    #[error("requested order (x {kx}, y {ky}) exceeds jet spec {spec}")]
    OrderExceedsSpec { kx: usize, ky: usize, spec: JetSpec },
    #[error("jet spec mismatch: {left} vs {right}")]
    SpecMismatch { left: JetSpec, right: JetSpec },
    #[error("jets have different base points")]
    BaseMismatch,
    #[error("division by a zero-valued jet")]
    DivisionByZero,
    #[error("square root of non-positive value {0}")]
    SqrtNonPositive(f64),
    #[error("fractional power of non-positive value {0}")]
    FractionalPowerNonPositive(f64),
    #[error("invalid exponent {p}/{q}")]
    InvalidExponent { p: i64, q: i64 },
}

#[cfg(test)]
mod proptests;
