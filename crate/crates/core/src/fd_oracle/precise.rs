//! Double-double evaluation of metric expressions at plain points.

use twofloat::TwoFloat;

use crate::jets::{JetError, Scalar};

/// Long division with three quotient digits; the library quotient rounds
/// its reciprocal residual in plain double and loses the low word.
fn quotient(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

fn int_power(x: TwoFloat, p: i64) -> TwoFloat {
    let m = x.powi(p.unsigned_abs() as i32);
    if p < 0 {
        quotient(TwoFloat::from(1.0), m)
    } else {
        m
    }
}

impl Scalar for TwoFloat {
    fn constant_like(&self, c: f64) -> Self {
        TwoFloat::from(c)
    }
    fn value(&self) -> f64 {
        f64::from(*self)
    }
    fn add(&self, rhs: &Self) -> Self {
        *self + *rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        *self - *rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        *self * *rhs
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn scale(&self, c: f64) -> Self {
        *self * c
    }
    fn div(&self, rhs: &Self) -> Result<Self, JetError> {
        if rhs.hi() == 0.0 || !rhs.is_valid() {
            return Err(JetError::DivisionByZero);
        }
        Ok(quotient(*self, *rhs))
    }
    fn sqrt(&self) -> Result<Self, JetError> {
        if self.hi() <= 0.0 || !self.is_valid() {
            return Err(JetError::SqrtNonPositive(self.hi()));
        }
        let s = TwoFloat::sqrt(*self);
        Ok(s + quotient(*self - s * s, s * 2.0))
    }
    fn powr(&self, p: i64, q: i64) -> Result<Self, JetError> {
        if q <= 0 {
            return Err(JetError::InvalidExponent { p, q });
        }
        if q == 1 {
            if p < 0 && self.hi() == 0.0 {
                return Err(JetError::DivisionByZero);
            }
            return Ok(int_power(*self, p));
        }
        if self.hi() <= 0.0 {
            return Err(JetError::FractionalPowerNonPositive(self.hi()));
        }
        // z^q = x^p by Newton from the double estimate
        let target = int_power(*self, p);
        let mut z = TwoFloat::from(self.hi().powf(p as f64 / q as f64));
        for _ in 0..3 {
            let zq1 = z.powi(q as i32 - 1);
            z -= quotient(zq1 * z - target, zq1 * q as f64);
        }
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractional_powers_reach_double_double_accuracy() {
        let x = TwoFloat::from(2.0) / TwoFloat::from(3.0);
        let z = x.powr(-3, 2).unwrap();
        let back = Scalar::div(&TwoFloat::from(1.0), &(z * z)).unwrap().powr(1, 3).unwrap();
        assert!(f64::from((back - x).abs()) < 1e-30);
        assert!(TwoFloat::from(-1.0).powr(1, 2).is_err());
        let r = Scalar::div(&TwoFloat::from(1.0), &TwoFloat::from(3.0)).unwrap();
        assert!(f64::from((r * 3.0 - 1.0).abs()) < 1e-31);
        let s = Scalar::sqrt(&TwoFloat::from(2.0)).unwrap();
        assert!(f64::from((s * s - 2.0).abs()) < 1e-31);
    }
}
