//! Finite-difference recomputation of the engine's tensors from plain-point
//! evaluations of `F^2`.
//!
//! Partials of `F^2` come from central tensor-product stencils with
//! Richardson extrapolation. The metric is evaluated in double-double
//! arithmetic on an exactly representable stencil lattice, so rounding noise
//! stays far below truncation error even for seventh-order partials.
//! Derivatives of the spray follow from the Leibniz expansion of
//! `g G = v / 4` with one dense solve per multi-index, and every tensor is
//! assembled from those numbers.

mod precise;

use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, LU, Dyn};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use twofloat::TwoFloat;

use crate::jets::{JetSpec, Point};
use crate::metric_lang::eval_f2;
use crate::metric_library::MetricDef;
use crate::tensor_engine::{EngineError, Geometry, MetricSource, Tensor, TensorId, Variance};

/// Highest total order the oracle differentiates.
pub const MAX_ORDER: usize = 7;

/// Tensors the oracle can rebuild.
pub const ORACLE_TENSORS: [TensorId; 11] = [
    TensorId::Fundamental,
    TensorId::Cartan,
    TensorId::Spray,
    TensorId::Connection,
    TensorId::Berwald,
    TensorId::MeanBerwald,
    TensorId::HCurvature,
    TensorId::Douglas,
    TensorId::Riemann,
    TensorId::Landsberg,
    TensorId::Wtilde,
];

/// Relative deviation allowed between engine and oracle.
pub fn gate(id: TensorId) -> f64 {
    match id {
        TensorId::Fundamental | TensorId::Cartan | TensorId::Spray => 1e-8,
        TensorId::Connection | TensorId::Berwald | TensorId::MeanBerwald => 1e-6,
        TensorId::Douglas | TensorId::Riemann => 1e-5,
        _ => 1e-3,
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FdError {
    #[error("order {0} exceeds the oracle limit {MAX_ORDER}")]
    OrderRefused(usize),
    #[error("stencil point x = {0:?} leaves the chart")]
    DomainExit(Vec<f64>),
    #[error("field cannot be evaluated at x = {x:?}, y = {y:?}")]
    NonFinite { x: Vec<f64>, y: Vec<f64> },
    #[error("fundamental tensor is singular at the sample")]
    Singular,
    #[error("the oracle does not rebuild {0}")]
    Unsupported(TensorId),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdConfig {
    /// Base step before per-coordinate scaling.
    pub h0: f64,
    /// Number of step sizes in the Richardson tableau; each halves the last.
    pub levels: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { h0: 1e-2, levels: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdEstimate {
    pub value: f64,
    /// Difference between the last two diagonal entries of the tableau.
    pub error: f64,
}

/// A scalar function of `(x, y)` evaluated in double-double precision.
pub trait Field: Sync {
    fn eval(&self, x: &[TwoFloat], y: &[TwoFloat]) -> Result<TwoFloat, FdError>;
}

impl<F> Field for F
where
    F: Fn(&[TwoFloat], &[TwoFloat]) -> Result<TwoFloat, FdError> + Sync,
{
    fn eval(&self, x: &[TwoFloat], y: &[TwoFloat]) -> Result<TwoFloat, FdError> {
        self(x, y)
    }
}

/// `F^2` of a catalog or user metric; refuses points off the chart.
pub struct MetricField<'a>(pub &'a MetricDef);

impl Field for MetricField<'_> {
    fn eval(&self, x: &[TwoFloat], y: &[TwoFloat]) -> Result<TwoFloat, FdError> {
        let plain = |v: &[TwoFloat]| v.iter().map(|c| f64::from(*c)).collect::<Vec<_>>();
        if !self.0.domain.contains(&plain(x)) {
            return Err(FdError::DomainExit(plain(x)));
        }
        match eval_f2(&self.0.expr, x, y) {
            Ok(v) if v.is_valid() && v.hi() > 0.0 => Ok(v),
            _ => Err(FdError::NonFinite {
                x: plain(x),
                y: plain(y),
            }),
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Largest power of two not above `v`.
fn pow2_floor(v: f64) -> f64 {
    2f64.powi(v.log2().floor() as i32)
}

/// Memoized stencil evaluations around one base point. Offsets are integer
/// multiples of half a step, and steps are powers of two, so every stencil
/// coordinate is exact in double-double.
struct Stencil<'a> {
    field: &'a dyn Field,
    base: Vec<f64>,
    steps: Vec<f64>,
    levels: usize,
    cache: RefCell<HashMap<(usize, Vec<i8>), TwoFloat>>,
}

impl<'a> Stencil<'a> {
    fn new(field: &'a dyn Field, point: &Point, cfg: &FdConfig) -> Self {
        let base: Vec<f64> = point.x.iter().chain(&point.y).copied().collect();
        let steps = base.iter().map(|c| pow2_floor(cfg.h0 * c.abs().max(1.0))).collect();
        Self {
            field,
            base,
            steps,
            levels: cfg.levels.max(1),
            cache: RefCell::new(HashMap::new()),
        }
    }

    fn dim(&self) -> usize {
        self.base.len() / 2
    }

    fn at(&self, level: usize, halves: &[i8]) -> Result<TwoFloat, FdError> {
        let key = (level, halves.to_vec());
        if let Some(v) = self.cache.borrow().get(&key) {
            return Ok(*v);
        }
        let shrink = 2f64.powi(-(level as i32) - 1);
        let z: Vec<TwoFloat> = self
            .base
            .iter()
            .zip(&self.steps)
            .zip(halves)
            .map(|((b, s), &o)| TwoFloat::new_add(*b, o as f64 * s * shrink))
            .collect();
        let n = self.dim();
        let v = self.field.eval(&z[..n], &z[n..])?;
        self.cache.borrow_mut().insert(key, v);
        Ok(v)
    }

    /// Partial with orders over the combined `(x, y)` coordinates.
    fn partial(&self, orders: &[u8]) -> Result<FdEstimate, FdError> {
        let total: usize = orders.iter().map(|&k| k as usize).sum();
        if total > MAX_ORDER {
            return Err(FdError::OrderRefused(total));
        }
        let zero = vec![0i8; orders.len()];
        if total == 0 {
            return Ok(FdEstimate {
                value: f64::from(self.at(0, &zero)?),
                error: 0.0,
            });
        }
        let active: Vec<usize> = (0..orders.len()).filter(|&c| orders[c] > 0).collect();
        let mut column = Vec::with_capacity(self.levels);
        for level in 0..self.levels {
            let mut js = vec![0u8; active.len()];
            let mut halves = zero.clone();
            let mut acc = TwoFloat::from(0.0);
            'walk: loop {
                let mut weight = 1.0;
                for (a, &c) in active.iter().enumerate() {
                    let (k, j) = (orders[c], js[a]);
                    weight *= binomial(k as usize, j as usize) * if j % 2 == 0 { 1.0 } else { -1.0 };
                    halves[c] = k as i8 - 2 * j as i8;
                }
                acc += self.at(level, &halves)? * weight;
                for a in 0..active.len() {
                    js[a] += 1;
                    if js[a] <= orders[active[a]] {
                        continue 'walk;
                    }
                    js[a] = 0;
                }
                break;
            }
            let shrink = 2f64.powi(-(level as i32));
            let denom: f64 = active
                .iter()
                .map(|&c| (self.steps[c] * shrink).powi(orders[c] as i32))
                .product();
            column.push(acc / denom);
        }
        // Richardson in h^2; afterwards column[i] holds the diagonal T[i][i]
        for m in 1..self.levels {
            let factor = 4f64.powi(m as i32) - 1.0;
            for i in (m..self.levels).rev() {
                let d = column[i] - column[i - 1];
                column[i] += d / factor;
            }
        }
        let last = self.levels - 1;
        let value = f64::from(column[last]);
        let error = if last > 0 {
            f64::from((column[last] - column[last - 1]).abs())
        } else {
            f64::NAN
        };
        Ok(FdEstimate { value, error })
    }
}

/// `d^alpha_x d^beta_y field` at `point`.
pub fn fd_partial(
    field: &dyn Field,
    point: &Point,
    alpha: &[u8],
    beta: &[u8],
    cfg: &FdConfig,
) -> Result<FdEstimate, FdError> {
    let orders: Vec<u8> = alpha.iter().chain(beta).copied().collect();
    Stencil::new(field, point, cfg).partial(&orders)
}

type Multi = Vec<u8>;

fn unit(len: usize, at: &[usize]) -> Multi {
    let mut m = vec![0u8; len];
    for &a in at {
        m[a] += 1;
    }
    m
}

fn plus(a: &[u8], b: &[u8]) -> Multi {
    a.iter().zip(b).map(|(u, v)| u + v).collect()
}

/// Every `g <= gamma` with its binomial weight `prod C(gamma_c, g_c)`.
fn sub_indices(gamma: &[u8]) -> Vec<(Multi, f64)> {
    let mut out = vec![(vec![], 1.0)];
    for &k in gamma {
        out = out
            .into_iter()
            .flat_map(|(m, w)| {
                (0..=k).map(move |j| {
                    let mut m = m.clone();
                    m.push(j);
                    (m, w * binomial(k as usize, j as usize))
                })
            })
            .collect();
    }
    out
}

/// Derivative data of one metric at one point.
struct OracleAt<'a> {
    n: usize,
    y: Vec<f64>,
    stencil: Stencil<'a>,
    f2: RefCell<HashMap<Multi, f64>>,
    spray: RefCell<HashMap<Multi, Vec<f64>>>,
    lu: LU<f64, Dyn, Dyn>,
    worst_error: Cell<f64>,
}

impl<'a> OracleAt<'a> {
    fn new(field: &'a dyn Field, point: &Point, cfg: &FdConfig) -> Result<Self, FdError> {
        let n = point.dim();
        let mut me = Self {
            n,
            y: point.y.clone(),
            stencil: Stencil::new(field, point, cfg),
            f2: RefCell::new(HashMap::new()),
            spray: RefCell::new(HashMap::new()),
            lu: DMatrix::<f64>::identity(n, n).lu(),
            worst_error: Cell::new(0.0),
        };
        let g = me.g_at(&vec![0; 2 * n])?;
        if g.clone().cholesky().is_none() {
            return Err(FdError::Singular);
        }
        me.lu = g.lu();
        Ok(me)
    }

    fn x(&self, i: usize) -> usize {
        i
    }

    fn yi(&self, i: usize) -> usize {
        self.n + i
    }

    fn f2(&self, m: &[u8]) -> Result<f64, FdError> {
        if let Some(v) = self.f2.borrow().get(m) {
            return Ok(*v);
        }
        let est = self.stencil.partial(m)?;
        let rel = est.error / est.value.abs().max(1.0);
        self.worst_error.set(self.worst_error.get().max(rel));
        self.f2.borrow_mut().insert(m.to_vec(), est.value);
        Ok(est.value)
    }

    /// `d^m g_ij` as a matrix.
    fn g_at(&self, m: &[u8]) -> Result<DMatrix<f64>, FdError> {
        let n = self.n;
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * self.f2(&plus(m, &unit(2 * n, &[self.yi(i), self.yi(j)])))?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// `d^m v_l` with `v_l = y^k d^2F^2/dx^k dy^l - dF^2/dx^l`.
    fn v_at(&self, m: &[u8]) -> Result<DVector<f64>, FdError> {
        let n = self.n;
        let mut v = DVector::zeros(n);
        for l in 0..n {
            let mut acc = -self.f2(&plus(m, &unit(2 * n, &[self.x(l)])))?;
            for k in 0..n {
                let xk_yl = unit(2 * n, &[self.x(k), self.yi(l)]);
                acc += self.y[k] * self.f2(&plus(m, &xk_yl))?;
                let yk = self.yi(k);
                if m[yk] > 0 {
                    let mut lower = m.to_vec();
                    lower[yk] -= 1;
                    acc += m[yk] as f64 * self.f2(&plus(&lower, &xk_yl))?;
                }
            }
            v[l] = acc;
        }
        Ok(v)
    }

    /// `d^m G` from `g d^m G = d^m v / 4 - sum_{0 < m' <= m} C(m, m') d^m' g d^(m - m') G`.
    fn spray(&self, m: &[u8]) -> Result<Vec<f64>, FdError> {
        if let Some(v) = self.spray.borrow().get(m) {
            return Ok(v.clone());
        }
        let total: usize = m.iter().map(|&k| k as usize).sum();
        if total + 2 > MAX_ORDER {
            return Err(FdError::OrderRefused(total + 2));
        }
        let mut rhs = self.v_at(m)? * 0.25;
        for (sub, w) in sub_indices(m) {
            if sub.iter().all(|&k| k == 0) {
                continue;
            }
            let rest: Multi = m.iter().zip(&sub).map(|(a, b)| a - b).collect();
            let lower = DVector::from_vec(self.spray(&rest)?);
            rhs -= self.g_at(&sub)? * lower * w;
        }
        let sol = self.lu.solve(&rhs).ok_or(FdError::Singular)?;
        let out: Vec<f64> = sol.iter().copied().collect();
        self.spray.borrow_mut().insert(m.to_vec(), out.clone());
        Ok(out)
    }

    fn gd(&self, i: usize, m: &[u8]) -> Result<f64, FdError> {
        Ok(self.spray(m)?[i])
    }

    fn ys(&self, idx: &[usize]) -> Multi {
        let at: Vec<usize> = idx.iter().map(|&i| self.yi(i)).collect();
        unit(2 * self.n, &at)
    }

    fn mixed(&self, xs: &[usize], ys: &[usize]) -> Multi {
        let at: Vec<usize> = xs.iter().copied().chain(ys.iter().map(|&i| self.yi(i))).collect();
        unit(2 * self.n, &at)
    }

    fn berwald(&self, i: usize, j: usize, k: usize, l: usize) -> Result<f64, FdError> {
        self.gd(i, &self.ys(&[j, k, l]))
    }

    fn mean_berwald_d(&self, j: usize, k: usize, extra: &Multi) -> Result<f64, FdError> {
        let mut acc = 0.0;
        for q in 0..self.n {
            acc += self.gd(q, &plus(&self.ys(&[j, k, q]), extra))?;
        }
        Ok(0.5 * acc)
    }

    fn divergence(&self, idx: &[usize]) -> Result<f64, FdError> {
        let mut acc = 0.0;
        for m in 0..self.n {
            let mut all = idx.to_vec();
            all.push(m);
            acc += self.gd(m, &self.ys(&all))?;
        }
        Ok(acc)
    }

    /// `d^gamma R^i_k` for a y-only multi-index `gamma`.
    fn riemann(&self, i: usize, k: usize, gamma: &[u8]) -> Result<f64, FdError> {
        let n = self.n;
        let mut acc = 2.0 * self.gd(i, &plus(gamma, &self.mixed(&[k], &[])))?;
        for j in 0..n {
            let nx = self.mixed(&[j], &[k]);
            acc -= self.y[j] * self.gd(i, &plus(gamma, &nx))?;
            let yj = self.yi(j);
            if gamma[yj] > 0 {
                let mut lower = gamma.to_vec();
                lower[yj] -= 1;
                acc -= gamma[yj] as f64 * self.gd(i, &plus(&lower, &nx))?;
            }
            for (sub, w) in sub_indices(gamma) {
                let rest: Multi = gamma.iter().zip(&sub).map(|(a, b)| a - b).collect();
                acc += 2.0 * w * self.gd(j, &sub)? * self.gd(i, &plus(&rest, &self.ys(&[j, k])))?;
                acc -= w * self.gd(i, &plus(&sub, &self.ys(&[j])))? * self.gd(j, &plus(&rest, &self.ys(&[k])))?;
            }
        }
        Ok(acc)
    }

    fn tensor(&self, id: TensorId) -> Result<Tensor<f64>, FdError> {
        use Variance::{Down, Up};
        let n = self.n;
        let zero = vec![0u8; 2 * n];
        let y = self.y.clone();
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let lower_y = || -> Result<Vec<f64>, FdError> {
            let g = self.g_at(&zero)?;
            Ok((0..n).map(|i| (0..n).map(|r| g[(i, r)] * y[r]).sum()).collect())
        };
        match id {
            TensorId::Fundamental => Tensor::try_from_fn(n, vec![Down, Down], |i| {
                Ok(0.5 * self.f2(&self.ys(&[i[0], i[1]]))?)
            }),
            TensorId::Cartan => Tensor::try_from_fn(n, vec![Down, Down, Down], |i| {
                Ok(0.25 * self.f2(&self.ys(i))?)
            }),
            TensorId::Spray => Tensor::try_from_fn(n, vec![Up], |i| self.gd(i[0], &zero)),
            TensorId::Connection => {
                Tensor::try_from_fn(n, vec![Up, Down], |i| self.gd(i[0], &self.ys(&[i[1]])))
            }
            TensorId::Berwald => Tensor::try_from_fn(n, vec![Up, Down, Down, Down], |i| {
                self.berwald(i[0], i[1], i[2], i[3])
            }),
            TensorId::MeanBerwald => Tensor::try_from_fn(n, vec![Down, Down], |i| {
                self.mean_berwald_d(i[0], i[1], &zero)
            }),
            TensorId::Douglas => {
                let c = 1.0 / (n as f64 + 1.0);
                Tensor::try_from_fn(n, vec![Up, Down, Down, Down], |idx| {
                    let [i, j, k, l] = [idx[0], idx[1], idx[2], idx[3]];
                    let model = self.divergence(&[j, k, l])? * y[i]
                        + self.divergence(&[j, k])? * delta(i, l)
                        + self.divergence(&[j, l])? * delta(i, k)
                        + self.divergence(&[k, l])? * delta(i, j);
                    Ok(self.berwald(i, j, k, l)? - c * model)
                })
            }
            TensorId::Landsberg => {
                let yl = lower_y()?;
                Tensor::try_from_fn(n, vec![Down, Down, Down], |idx| {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += yl[i] * self.berwald(i, idx[0], idx[1], idx[2])?;
                    }
                    Ok(-0.5 * acc)
                })
            }
            TensorId::HCurvature => Tensor::try_from_fn(n, vec![Down, Down], |idx| {
                let [j, k] = [idx[0], idx[1]];
                let mut acc = 0.0;
                for m in 0..n {
                    acc += y[m] * self.mean_berwald_d(j, k, &self.mixed(&[m], &[]))?;
                    acc -= 2.0 * self.gd(m, &zero)? * self.mean_berwald_d(j, k, &self.ys(&[m]))?;
                    acc -= self.gd(m, &self.ys(&[j]))? * self.mean_berwald_d(m, k, &zero)?;
                    acc -= self.gd(m, &self.ys(&[k]))? * self.mean_berwald_d(j, m, &zero)?;
                }
                Ok(acc)
            }),
            TensorId::Riemann => {
                Tensor::try_from_fn(n, vec![Up, Down], |i| self.riemann(i[0], i[1], &zero))
            }
            TensorId::Wtilde => {
                // K_jk = R_j^m_mk and its y-gradient
                let kk = |j: usize, k: usize, extra: &[usize]| -> Result<f64, FdError> {
                    let mut acc = 0.0;
                    for m in 0..n {
                        let mut a = vec![j, k];
                        a.extend_from_slice(extra);
                        let mut b = vec![j, m];
                        b.extend_from_slice(extra);
                        acc += self.riemann(m, m, &self.ys(&a))? - self.riemann(m, k, &self.ys(&b))?;
                    }
                    Ok(acc / 3.0)
                };
                let kt: Tensor<f64> = Tensor::try_from_fn(n, vec![Down, Down], |i| {
                    let [j, k] = [i[0], i[1]];
                    let mut acc = n as f64 * kk(j, k, &[])? + kk(k, j, &[])?;
                    for r in 0..n {
                        acc += y[r] * kk(k, r, &[j])?;
                    }
                    Ok::<_, FdError>(acc)
                })?;
                let kt0: Vec<f64> = (0..n)
                    .map(|k| (0..n).map(|j| y[j] * kt.get(&[j, k])).sum())
                    .collect();
                let kt00: f64 = (0..n).map(|k| y[k] * kt0[k]).sum();
                let c = 1.0 / (1.0 - (n * n) as f64);
                Tensor::try_from_fn(n, vec![Up, Down], |i| {
                    let [a, b] = [i[0], i[1]];
                    Ok(self.riemann(a, b, &zero)? - c * (y[a] * kt0[b] - delta(a, b) * kt00))
                })
            }
            other => Err(FdError::Unsupported(other)),
        }
    }
}

/// Oracle recomputation of one tensor at one point, with the largest
/// relative Richardson error estimate among the partials it used.
pub fn fd_tensor(def: &MetricDef, id: TensorId, point: &Point, cfg: &FdConfig) -> Result<(Tensor<f64>, f64), FdError> {
    let field = MetricField(def);
    let oracle = OracleAt::new(&field, point, cfg)?;
    let t = oracle.tensor(id)?;
    Ok((t, oracle.worst_error.get()))
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub metric: String,
    pub tensor: String,
    pub gate: f64,
    pub samples: usize,
    /// Max over samples of `max |oracle - engine| / max(1, max |engine|)`.
    pub max_deviation: f64,
    pub worst_sample: usize,
    pub per_sample: Vec<f64>,
    /// Largest relative Richardson error estimate among the partials used.
    pub max_error_estimate: f64,
    pub passed: bool,
}

/// Compares engine and oracle values of `id` at every sample.
pub fn fd_tensor_check(def: &MetricDef, id: TensorId, samples: &[Point], cfg: &FdConfig) -> Result<OracleReport, FdError> {
    if !ORACLE_TENSORS.contains(&id) {
        return Err(FdError::Unsupported(id));
    }
    let source = MetricSource::new(def);
    let per: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|p| {
            let geo = Geometry::new(&source, p.clone(), JetSpec::full(p.dim()))?;
            let engine = geo.tensor(id)?.as_tensor();
            let (oracle, err) = fd_tensor(def, id, p, cfg)?;
            Ok((oracle.max_abs_diff(&engine) / engine.max_abs().max(1.0), err))
        })
        .collect::<Result<_, FdError>>()?;
    let (worst_sample, max_deviation) = per
        .iter()
        .map(|p| p.0)
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    let g = gate(id);
    Ok(OracleReport {
        metric: def.name.clone(),
        tensor: id.symbol().to_string(),
        gate: g,
        samples: samples.len(),
        max_deviation,
        worst_sample,
        per_sample: per.iter().map(|p| p.0).collect(),
        max_error_estimate: per.iter().map(|p| p.1).fold(0.0, f64::max),
        passed: max_deviation < g,
    })
}

#[cfg(test)]
mod tests;
