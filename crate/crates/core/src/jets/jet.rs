use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::multi_index::{index_set, MultiIndexSet};
use super::JetError;

/// Truncation budget of a jet: x-order `<= kx` and y-order `<= ky`,
/// counted separately (a rectangular cap, not a total-degree cap).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JetSpec {
    pub dim: usize,
    pub kx: usize,
    pub ky: usize,
}

impl JetSpec {
    pub fn new(dim: usize, kx: usize, ky: usize) -> Result<Self, JetError> {
        if dim == 0 {
            return Err(JetError::InvalidDimension(dim));
        }
        Ok(Self { dim, kx, ky })
    }

    /// The default budget, enough for every tensor the engine produces.
    pub fn full(dim: usize) -> Self {
        Self { dim, kx: 2, ky: 7 }
    }

    /// Largest spec contained in both.
    pub fn meet(self, other: Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            kx: self.kx.min(other.kx),
            ky: self.ky.min(other.ky),
        }
    }

    pub fn covers(&self, kx: usize, ky: usize) -> bool {
        self.kx >= kx && self.ky >= ky
    }

    /// Spec left after differentiating `dx` times in x and `dy` times in y.
    pub fn lowered(&self, dx: usize, dy: usize) -> Option<Self> {
        Some(Self {
            dim: self.dim,
            kx: self.kx.checked_sub(dx)?,
            ky: self.ky.checked_sub(dy)?,
        })
    }
}

impl fmt::Display for JetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(n={}, kx={}, ky={})", self.dim, self.kx, self.ky)
    }
}

/// A point `(x, y)` of the tangent bundle of a chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Point {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Checks matching dimensions and `y != 0`.
    pub fn check_admissible(&self) -> Result<(), JetError> {
        if self.x.len() != self.y.len() || self.x.is_empty() {
            return Err(JetError::DimensionMismatch {
                expected: self.x.len(),
                found: self.y.len(),
            });
        }
        if self.y.iter().all(|&v| v == 0.0) {
            return Err(JetError::ZeroVelocity);
        }
        Ok(())
    }
}

/// Which coordinate function to lift.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coordinate {
    X(usize),
    Y(usize),
}

/// Truncated mixed Taylor expansion of a scalar field of `(x, y)` about a
/// base point.
///
/// `coeffs[(alpha, beta)]` stores `d^alpha_x d^beta_y f / (alpha! beta!)`.
/// Storage is dense, row-major over (x-index, y-index) ranks.
#[derive(Clone)]
pub struct Jet {
    spec: JetSpec,
    base: Arc<Point>,
    xs: Arc<MultiIndexSet>,
    ys: Arc<MultiIndexSet>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("spec", &self.spec)
            .field("value", &self.value())
            .finish_non_exhaustive()
    }
}

impl Jet {
    fn zeros(spec: JetSpec, base: Arc<Point>) -> Self {
        let xs = index_set(spec.dim, spec.kx);
        let ys = index_set(spec.dim, spec.ky);
        let coeffs = vec![0.0; xs.len() * ys.len()];
        Self {
            spec,
            base,
            xs,
            ys,
            coeffs,
        }
    }

    pub fn constant(spec: JetSpec, base: Arc<Point>, value: f64) -> Self {
        let mut j = Self::zeros(spec, base);
        j.coeffs[0] = value;
        j
    }

    /// Jet of a coordinate function at `base`.
    pub fn lift(spec: JetSpec, base: Arc<Point>, which: Coordinate) -> Result<Self, JetError> {
        base.check_admissible()?;
        if base.dim() != spec.dim {
            return Err(JetError::DimensionMismatch {
                expected: spec.dim,
                found: base.dim(),
            });
        }
        let (value, slot) = match which {
            Coordinate::X(i) if i < spec.dim => (base.x[i], (true, i)),
            Coordinate::Y(i) if i < spec.dim => (base.y[i], (false, i)),
            Coordinate::X(i) | Coordinate::Y(i) => {
                return Err(JetError::IndexOutOfRange {
                    index: i,
                    dim: spec.dim,
                })
            }
        };
        let mut j = Self::constant(spec, base, value);
        let ny = j.ys.len();
        match slot {
            (true, i) if spec.kx >= 1 => {
                let ix = j.xs.raise(0, i).expect("order-1 index present");
                j.coeffs[ix * ny] = 1.0;
            }
            (false, i) if spec.ky >= 1 => {
                let iy = j.ys.raise(0, i).expect("order-1 index present");
                j.coeffs[iy] = 1.0;
            }
            _ => {}
        }
        Ok(j)
    }

    /// Constant jet sharing this jet's spec and base.
    pub fn like(&self, value: f64) -> Self {
        Self::constant(self.spec, self.base.clone(), value)
    }

    pub fn spec(&self) -> JetSpec {
        self.spec
    }

    pub fn base(&self) -> &Arc<Point> {
        &self.base
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn ny(&self) -> usize {
        self.ys.len()
    }

    fn locate(&self, alpha: &[u8], beta: &[u8]) -> Result<usize, JetError> {
        let order_x: usize = alpha.iter().map(|&a| a as usize).sum();
        let order_y: usize = beta.iter().map(|&b| b as usize).sum();
        if alpha.len() != self.spec.dim || beta.len() != self.spec.dim {
            return Err(JetError::DimensionMismatch {
                expected: self.spec.dim,
                found: alpha.len().max(beta.len()),
            });
        }
        if order_x > self.spec.kx || order_y > self.spec.ky {
            return Err(JetError::OrderExceedsSpec {
                kx: order_x,
                ky: order_y,
                spec: self.spec,
            });
        }
        let ix = self.xs.rank_of(alpha).expect("within order");
        let iy = self.ys.rank_of(beta).expect("within order");
        Ok(ix * self.ny() + iy)
    }

    /// Raw Taylor coefficient of `(alpha, beta)`.
    pub fn coefficient(&self, alpha: &[u8], beta: &[u8]) -> Result<f64, JetError> {
        Ok(self.coeffs[self.locate(alpha, beta)?])
    }

    /// Mixed partial derivative `d^alpha_x d^beta_y f` at the base point.
    pub fn partial(&self, alpha: &[u8], beta: &[u8]) -> Result<f64, JetError> {
        let k = self.locate(alpha, beta)?;
        let ix = k / self.ny();
        let iy = k % self.ny();
        Ok(self.coeffs[k] * self.xs.factorial(ix) * self.ys.factorial(iy))
    }

    /// Iterator over `(alpha, beta, coefficient)`.
    pub fn terms(&self) -> impl Iterator<Item = (&[u8], &[u8], f64)> + '_ {
        let ny = self.ny();
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(k, &c)| (self.xs.index(k / ny), self.ys.index(k % ny), c))
    }

    pub fn truncated(&self, spec: JetSpec) -> Result<Self, JetError> {
        if spec.dim != self.spec.dim || !self.spec.covers(spec.kx, spec.ky) {
            return Err(JetError::SpecMismatch {
                left: self.spec,
                right: spec,
            });
        }
        if spec == self.spec {
            return Ok(self.clone());
        }
        let mut out = Self::zeros(spec, self.base.clone());
        let (nx, ny) = (out.xs.len(), out.ny());
        let src_ny = self.ny();
        for ix in 0..nx {
            out.coeffs[ix * ny..(ix + 1) * ny]
                .copy_from_slice(&self.coeffs[ix * src_ny..ix * src_ny + ny]);
        }
        Ok(out)
    }

    /// Partial derivative in `x^var`; the result has x-order one lower.
    pub fn dx(&self, var: usize) -> Result<Self, JetError> {
        self.differentiate(Coordinate::X(var))
    }

    /// Partial derivative in `y^var`; the result has y-order one lower.
    pub fn dy(&self, var: usize) -> Result<Self, JetError> {
        self.differentiate(Coordinate::Y(var))
    }

    fn differentiate(&self, which: Coordinate) -> Result<Self, JetError> {
        let (var, in_x) = match which {
            Coordinate::X(v) => (v, true),
            Coordinate::Y(v) => (v, false),
        };
        if var >= self.spec.dim {
            return Err(JetError::IndexOutOfRange {
                index: var,
                dim: self.spec.dim,
            });
        }
        let lowered = if in_x {
            self.spec.lowered(1, 0)
        } else {
            self.spec.lowered(0, 1)
        };
        let spec = lowered.ok_or(JetError::OrderExceedsSpec {
            kx: usize::from(in_x),
            ky: usize::from(!in_x),
            spec: self.spec,
        })?;
        let mut out = Self::zeros(spec, self.base.clone());
        let (nx, ny) = (out.xs.len(), out.ny());
        let src_ny = self.ny();
        for ix in 0..nx {
            for iy in 0..ny {
                let (src, factor) = if in_x {
                    let r = self.xs.raise(ix, var).expect("raised index within source");
                    (r * src_ny + iy, self.xs.index(r)[var] as f64)
                } else {
                    let r = self.ys.raise(iy, var).expect("raised index within source");
                    (ix * src_ny + r, self.ys.index(r)[var] as f64)
                };
                out.coeffs[ix * ny + iy] = factor * self.coeffs[src];
            }
        }
        Ok(out)
    }

    fn check_base(&self, other: &Self) -> Result<(), JetError> {
        if Arc::ptr_eq(&self.base, &other.base) || self.base == other.base {
            Ok(())
        } else {
            Err(JetError::BaseMismatch)
        }
    }

    fn check_same(&self, other: &Self) -> Result<(), JetError> {
        if self.spec != other.spec {
            return Err(JetError::SpecMismatch {
                left: self.spec,
                right: other.spec,
            });
        }
        self.check_base(other)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, JetError> {
        self.check_same(other)?;
        Ok(self.zip_meet(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, JetError> {
        self.check_same(other)?;
        Ok(self.zip_meet(other, |a, b| a - b))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, JetError> {
        self.check_same(other)?;
        Ok(self.mul_meet(other))
    }

    /// Quotient by recursive coefficient solving; requires equal spec and base.
    pub fn try_div(&self, other: &Self) -> Result<Self, JetError> {
        self.check_same(other)?;
        self.div_meet(other)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add_scalar(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    fn zip_meet(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let spec = self.spec.meet(other.spec);
        let mut out = Self::zeros(spec, self.base.clone());
        let (nx, ny) = (out.xs.len(), out.ny());
        let (na, nb) = (self.ny(), other.ny());
        for ix in 0..nx {
            for iy in 0..ny {
                out.coeffs[ix * ny + iy] =
                    f(self.coeffs[ix * na + iy], other.coeffs[ix * nb + iy]);
            }
        }
        out
    }

    /// Cauchy product truncated to the common spec.
    fn mul_meet(&self, other: &Self) -> Self {
        let spec = self.spec.meet(other.spec);
        let mut out = Self::zeros(spec, self.base.clone());
        let (nx, ny) = (out.xs.len(), out.ny());
        let (na, nb) = (self.ny(), other.ny());
        let xs = out.xs.clone();
        let ys = out.ys.clone();
        for ix3 in 0..nx {
            let row = &mut out.coeffs[ix3 * ny..(ix3 + 1) * ny];
            for &(ix1, ix2) in xs.pairs(ix3) {
                let a = &self.coeffs[ix1 as usize * na..];
                let b = &other.coeffs[ix2 as usize * nb..];
                for (iy3, slot) in row.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for &(iy1, iy2) in ys.pairs(iy3) {
                        s += a[iy1 as usize] * b[iy2 as usize];
                    }
                    *slot += s;
                }
            }
        }
        out
    }

    fn div_meet(&self, other: &Self) -> Result<Self, JetError> {
        let b0 = other.value();
        if b0 == 0.0 || !b0.is_finite() {
            return Err(JetError::DivisionByZero);
        }
        let spec = self.spec.meet(other.spec);
        let mut out = Self::zeros(spec, self.base.clone());
        let (nx, ny) = (out.xs.len(), out.ny());
        let (na, nb) = (self.ny(), other.ny());
        let xs = out.xs.clone();
        let ys = out.ys.clone();
        for ix3 in 0..nx {
            for iy3 in 0..ny {
                let mut s = self.coeffs[ix3 * na + iy3];
                for &(ix1, ix2) in xs.pairs(ix3) {
                    for &(iy1, iy2) in ys.pairs(iy3) {
                        if ix2 == 0 && iy2 == 0 {
                            continue;
                        }
                        s -= out.coeffs[ix1 as usize * ny + iy1 as usize]
                            * other.coeffs[ix2 as usize * nb + iy2 as usize];
                    }
                }
                out.coeffs[ix3 * ny + iy3] = s / b0;
            }
        }
        Ok(out)
    }

    /// Square root by recursive coefficient solving.
    pub fn sqrt(&self) -> Result<Self, JetError> {
        let a0 = self.value();
        if a0 <= 0.0 || !a0.is_finite() {
            return Err(JetError::SqrtNonPositive(a0));
        }
        let mut out = Self::zeros(self.spec, self.base.clone());
        let (nx, ny) = (out.xs.len(), out.ny());
        let s0 = a0.sqrt();
        let xs = out.xs.clone();
        let ys = out.ys.clone();
        out.coeffs[0] = s0;
        for ix3 in 0..nx {
            for iy3 in 0..ny {
                if ix3 == 0 && iy3 == 0 {
                    continue;
                }
                let mut s = self.coeffs[ix3 * ny + iy3];
                for &(ix1, ix2) in xs.pairs(ix3) {
                    for &(iy1, iy2) in ys.pairs(iy3) {
                        let first_is_self = ix1 as usize == ix3 && iy1 as usize == iy3;
                        let second_is_self = ix2 as usize == ix3 && iy2 as usize == iy3;
                        if first_is_self || second_is_self {
                            continue;
                        }
                        s -= out.coeffs[ix1 as usize * ny + iy1 as usize]
                            * out.coeffs[ix2 as usize * ny + iy2 as usize];
                    }
                }
                out.coeffs[ix3 * ny + iy3] = s / (2.0 * s0);
            }
        }
        Ok(out)
    }

    pub fn recip(&self) -> Result<Self, JetError> {
        self.like(1.0).div_meet(self)
    }

    /// `self^(p/q)` for a rational exponent with `q > 0`.
    ///
    /// Integer exponents use repeated products; `1/2` uses [`Jet::sqrt`];
    /// other fractions compose the binomial series in the nilpotent part.
    pub fn powr(&self, p: i64, q: i64) -> Result<Self, JetError> {
        if q <= 0 {
            return Err(JetError::InvalidExponent { p, q });
        }
        let g = gcd(p.unsigned_abs(), q as u64) as i64;
        let (p, q) = (p / g.max(1), q / g.max(1));
        if q == 1 {
            let positive = self.powi(p.unsigned_abs());
            return if p < 0 { positive.recip() } else { Ok(positive) };
        }
        if p == 1 && q == 2 {
            return self.sqrt();
        }
        let a0 = self.value();
        if a0 <= 0.0 || !a0.is_finite() {
            return Err(JetError::FractionalPowerNonPositive(a0));
        }
        let r = p as f64 / q as f64;
        let delta = self.scale(1.0 / a0).add_scalar(-1.0);
        // delta has zero value, so delta^m vanishes beyond the total order
        let terms = self.spec.kx + self.spec.ky;
        let mut binom = vec![1.0; terms + 1];
        for m in 1..=terms {
            binom[m] = binom[m - 1] * (r - (m as f64 - 1.0)) / m as f64;
        }
        let mut acc = self.like(binom[terms]);
        for m in (0..terms).rev() {
            acc = acc.mul_meet(&delta).add_scalar(binom[m]);
        }
        Ok(acc.scale(a0.powf(r)))
    }

    pub fn powi(&self, n: u64) -> Self {
        let mut result = self.like(1.0);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_meet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_meet(&base);
            }
        }
        result
    }

    /// Largest absolute coefficient, used for tolerance scaling.
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

// Operator forms truncate to the common spec. Mixing bases is a logic error.

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.check_base(rhs).expect("jets share a base point");
        self.zip_meet(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.check_base(rhs).expect("jets share a base point");
        self.zip_meet(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.check_base(rhs).expect("jets share a base point");
        self.mul_meet(rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Quotient truncated to the common spec.
pub fn div_meet(a: &Jet, b: &Jet) -> Result<Jet, JetError> {
    a.check_base(b)?;
    a.div_meet(b)
}
