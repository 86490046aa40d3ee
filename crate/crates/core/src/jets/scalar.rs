use super::{Jet, JetError};

/// Numeric type the metric evaluators run on: plain `f64` for point
/// evaluation, [`Jet`] for differentiation.
pub trait Scalar: Clone {
    /// A constant of the same kind as `self`.
    fn constant_like(&self, c: f64) -> Self;
    fn value(&self) -> f64;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn div(&self, rhs: &Self) -> Result<Self, JetError>;
    fn sqrt(&self) -> Result<Self, JetError>;
    fn powr(&self, p: i64, q: i64) -> Result<Self, JetError>;
}

impl Scalar for f64 {
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn div(&self, rhs: &Self) -> Result<Self, JetError> {
        if *rhs == 0.0 || !rhs.is_finite() {
            return Err(JetError::DivisionByZero);
        }
        Ok(self / rhs)
    }
    fn sqrt(&self) -> Result<Self, JetError> {
        // Same admissibility as the jet kernel: derivatives of sqrt blow up at 0.
        if *self <= 0.0 || !self.is_finite() {
            return Err(JetError::SqrtNonPositive(*self));
        }
        Ok(f64::sqrt(*self))
    }
    fn powr(&self, p: i64, q: i64) -> Result<Self, JetError> {
        if q <= 0 {
            return Err(JetError::InvalidExponent { p, q });
        }
        if q == 1 {
            if p < 0 && *self == 0.0 {
                return Err(JetError::DivisionByZero);
            }
            return Ok(self.powi(p as i32));
        }
        if *self <= 0.0 {
            return Err(JetError::FractionalPowerNonPositive(*self));
        }
        Ok(self.powf(p as f64 / q as f64))
    }
}

impl Scalar for Jet {
    fn constant_like(&self, c: f64) -> Self {
        self.like(c)
    }
    fn value(&self) -> f64 {
        Jet::value(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, c: f64) -> Self {
        Jet::scale(self, c)
    }
    fn div(&self, rhs: &Self) -> Result<Self, JetError> {
        super::div_meet(self, rhs)
    }
    fn sqrt(&self) -> Result<Self, JetError> {
        Jet::sqrt(self)
    }
    fn powr(&self, p: i64, q: i64) -> Result<Self, JetError> {
        Jet::powr(self, p, q)
    }
}
