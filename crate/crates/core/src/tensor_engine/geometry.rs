use std::sync::Arc;

use nalgebra::DMatrix;
use once_cell::sync::OnceCell;
use serde::Serialize;

use super::tensor::{JetTensor, Tensor, TensorValue, Variance};
use super::{EngineError, TensorId};
use crate::jets::{Coordinate, Jet, JetSpec, Point};
use crate::metric_lang::{eval_as_jet, MetricExpr};
use crate::metric_library::{ChartDomain, MetricDef};

use Variance::{Down, Up};

/// Anything that yields spray coefficients as jets.
pub trait SpraySource: Send + Sync {
    fn dim(&self) -> usize;

    fn domain(&self) -> ChartDomain;

    /// Jet of `F^2`, for sources that come from a metric.
    fn f2_jet(&self, spec: JetSpec, point: &Point) -> Result<Jet, EngineError>;

    fn has_metric(&self) -> bool;

    /// Spray coefficients `G^i` as jets of the given spec.
    fn spray_jets(&self, spec: JetSpec, point: &Point) -> Result<Vec<Jet>, EngineError>;
}

/// Geodesic spray of a Finsler metric.
#[derive(Debug, Clone)]
pub struct MetricSource {
    pub expr: MetricExpr,
    pub dim: usize,
    pub domain: ChartDomain,
}

impl MetricSource {
    pub fn new(def: &MetricDef) -> Self {
        Self {
            expr: def.expr.clone(),
            dim: def.dim,
            domain: def.domain,
        }
    }
}

impl SpraySource for MetricSource {
    fn dim(&self) -> usize {
        self.dim
    }

    fn domain(&self) -> ChartDomain {
        self.domain
    }

    fn f2_jet(&self, spec: JetSpec, point: &Point) -> Result<Jet, EngineError> {
        if !self.domain.contains(&point.x) {
            return Err(EngineError::OutsideDomain);
        }
        Ok(eval_as_jet(&self.expr, spec, point)?)
    }

    fn has_metric(&self) -> bool {
        true
    }

    fn spray_jets(&self, spec: JetSpec, point: &Point) -> Result<Vec<Jet>, EngineError> {
        let f2 = self.f2_jet(JetSpec::new(spec.dim, spec.kx + 1, spec.ky + 2)?, point)?;
        let g = fundamental(&f2)?;
        let ginv = invert(&g)?;
        spray_from_f2(&f2, &ginv)
    }
}

/// `g_ij = 1/2 d^2 F^2 / dy^i dy^j`, certified positive definite at the base.
pub(crate) fn fundamental(f2: &Jet) -> Result<JetTensor, EngineError> {
    let n = f2.spec().dim;
    if f2.spec().ky < 2 {
        return Err(EngineError::InsufficientOrder {
            tensor: "g",
            spec: f2.spec(),
        });
    }
    let grad: Vec<Jet> = (0..n).map(|i| f2.dy(i)).collect::<Result<_, _>>()?;
    let g = Tensor::try_from_fn(n, vec![Down, Down], |i| {
        grad[i[0]].dy(i[1]).map(|j| j.scale(0.5))
    })?;
    cholesky_check(&g.values())?;
    Ok(g)
}

fn cholesky_check(g: &Tensor<f64>) -> Result<(), EngineError> {
    let n = g.dim();
    let m = DMatrix::from_row_slice(n, n, g.data());
    if m.iter().any(|v| !v.is_finite()) {
        return Err(EngineError::NonFinite("g"));
    }
    match m.clone().cholesky() {
        Some(_) => Ok(()),
        None => Err(EngineError::NotPositiveDefinite {
            min_eigenvalue: m.symmetric_eigenvalues().min(),
        }),
    }
}

/// Inverse of a symmetric positive definite jet matrix by Gauss-Jordan
/// elimination; no pivoting is needed once the base value is certified.
pub(crate) fn invert(g: &JetTensor) -> Result<JetTensor, EngineError> {
    let n = g.dim();
    let mut a: Vec<Vec<Jet>> = (0..n)
        .map(|i| (0..n).map(|j| g.get(&[i, j]).clone()).collect())
        .collect();
    let zero = a[0][0].like(0.0);
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { zero.like(1.0) } else { zero.clone() })
                .collect()
        })
        .collect();
    for c in 0..n {
        let pivot = a[c][c].recip()?;
        for k in 0..n {
            a[c][k] = &a[c][k] * &pivot;
            inv[c][k] = &inv[c][k] * &pivot;
        }
        for r in 0..n {
            if r == c {
                continue;
            }
            let f = a[r][c].clone();
            for k in 0..n {
                a[r][k] = &a[r][k] - &(&f * &a[c][k]);
                inv[r][k] = &inv[r][k] - &(&f * &inv[c][k]);
            }
        }
    }
    Ok(Tensor::from_fn(n, vec![Up, Up], |i| inv[i[0]][i[1]].clone()))
}

/// `G^i = 1/4 g^il (d^2 F^2/dx^k dy^l y^k - dF^2/dx^l)`.
pub(crate) fn spray_from_f2(f2: &Jet, ginv: &JetTensor) -> Result<Vec<Jet>, EngineError> {
    let spec = f2.spec();
    let n = spec.dim;
    if spec.kx < 1 || spec.ky < 2 {
        return Err(EngineError::InsufficientOrder { tensor: "G", spec });
    }
    let ys = coordinate_y(spec, f2.base());
    let fx: Vec<Jet> = (0..n).map(|l| f2.dx(l)).collect::<Result<_, _>>()?;
    let mut v = Vec::with_capacity(n);
    for l in 0..n {
        let mut acc = -&fx[l];
        for k in 0..n {
            acc = &acc + &(&ys[k] * &fx[k].dy(l)?);
        }
        v.push(acc);
    }
    Ok((0..n)
        .map(|i| {
            let s = sum((0..n).map(|l| ginv.get(&[i, l]) * &v[l]));
            s.scale(0.25)
        })
        .collect())
}

fn coordinate_y(spec: JetSpec, base: &Arc<Point>) -> Vec<Jet> {
    (0..spec.dim)
        .map(|i| Jet::lift(spec, base.clone(), Coordinate::Y(i)).expect("admissible base"))
        .collect()
}

fn sum(mut it: impl Iterator<Item = Jet>) -> Jet {
    let first = it.next().expect("non-empty sum");
    it.fold(first, |acc, t| &acc + &t)
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

fn lowered(t: &JetTensor, name: &'static str, dx: usize, dy: usize) -> Result<(), EngineError> {
    match t.spec().lowered(dx, dy) {
        Some(_) => Ok(()),
        None => Err(EngineError::InsufficientOrder {
            tensor: name,
            spec: t.spec(),
        }),
    }
}

/// Residual of a scalar or tensor identity together with a magnitude for
/// relative judgement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub residual: f64,
    pub scale: f64,
}

/// Relative residuals of the contraction identities at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResiduals {
    /// `g_ij y^i y^j - F^2`
    pub g_yy: f64,
    /// `C_ijk y^k`
    pub cartan_y: f64,
    /// `N^i_j y^j - 2 G^i`
    pub connection_y: f64,
    /// `B_j^i_kl y^l`
    pub berwald_y: f64,
    /// `R^i_k y^k`
    pub riemann_y: f64,
    /// `D_j^m_km`
    pub douglas_trace: f64,
    /// `h h - h`
    pub angular_idempotent: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [
            self.g_yy,
            self.cartan_y,
            self.connection_y,
            self.berwald_y,
            self.riemann_y,
            self.douglas_trace,
            self.angular_idempotent,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Every tensor at one point, computed lazily through jets of `F^2`
/// (or of the spray, for sources without a metric).
pub struct Geometry<'a> {
    source: &'a dyn SpraySource,
    point: Arc<Point>,
    orders: JetSpec,
    f2: OnceCell<Jet>,
    g: OnceCell<JetTensor>,
    ginv: OnceCell<JetTensor>,
    spray: OnceCell<JetTensor>,
    connection: OnceCell<JetTensor>,
    christoffel: OnceCell<JetTensor>,
    berwald: OnceCell<JetTensor>,
    mean_berwald: OnceCell<JetTensor>,
    douglas_def: OnceCell<JetTensor>,
    douglas_d2: OnceCell<JetTensor>,
    riemann: OnceCell<JetTensor>,
    riemann_full: OnceCell<JetTensor>,
}

impl<'a> Geometry<'a> {
    /// `orders` is the jet budget of `F^2`; spray-only sources use it lowered
    /// by one x-order and two y-orders.
    pub fn new(source: &'a dyn SpraySource, point: Point, orders: JetSpec) -> Result<Self, EngineError> {
        point.check_admissible()?;
        if point.dim() != source.dim() || orders.dim != source.dim() {
            return Err(EngineError::Dimension {
                expected: source.dim(),
                found: point.dim(),
            });
        }
        if !source.domain().contains(&point.x) {
            return Err(EngineError::OutsideDomain);
        }
        Ok(Self {
            source,
            point: Arc::new(point),
            orders,
            f2: OnceCell::new(),
            g: OnceCell::new(),
            ginv: OnceCell::new(),
            spray: OnceCell::new(),
            connection: OnceCell::new(),
            christoffel: OnceCell::new(),
            berwald: OnceCell::new(),
            mean_berwald: OnceCell::new(),
            douglas_def: OnceCell::new(),
            douglas_d2: OnceCell::new(),
            riemann: OnceCell::new(),
            riemann_full: OnceCell::new(),
        })
    }

    pub fn point(&self) -> &Point {
        &self.point
    }

    pub fn dim(&self) -> usize {
        self.orders.dim
    }

    pub fn orders(&self) -> JetSpec {
        self.orders
    }

    pub fn has_metric(&self) -> bool {
        self.source.has_metric()
    }

    fn ys(&self, spec: JetSpec) -> Vec<Jet> {
        coordinate_y(spec, &self.point)
    }

    pub fn f2(&self) -> Result<&Jet, EngineError> {
        self.f2
            .get_or_try_init(|| self.source.f2_jet(self.orders, &self.point))
    }

    /// Fundamental tensor `g_ij` as jets.
    pub fn g(&self) -> Result<&JetTensor, EngineError> {
        self.g.get_or_try_init(|| fundamental(self.f2()?))
    }

    pub fn g_inv(&self) -> Result<&JetTensor, EngineError> {
        self.ginv.get_or_try_init(|| invert(self.g()?))
    }

    /// Spray coefficients `G^i`.
    pub fn spray(&self) -> Result<&JetTensor, EngineError> {
        self.spray.get_or_try_init(|| {
            let n = self.dim();
            let jets = if self.has_metric() {
                spray_from_f2(self.f2()?, self.g_inv()?)?
            } else {
                let spec = self.orders.lowered(1, 2).ok_or(EngineError::InsufficientOrder {
                    tensor: "G",
                    spec: self.orders,
                })?;
                self.source.spray_jets(spec, &self.point)?
            };
            Ok(Tensor::from_fn(n, vec![Up], |i| jets[i[0]].clone()))
        })
    }

    /// `N^i_j = dG^i/dy^j`.
    pub fn connection(&self) -> Result<&JetTensor, EngineError> {
        self.connection
            .get_or_try_init(|| Ok(self.spray()?.grad_y()?))
    }

    /// `G^i_jk = d^2 G^i / dy^j dy^k`.
    pub fn christoffel(&self) -> Result<&JetTensor, EngineError> {
        self.christoffel
            .get_or_try_init(|| Ok(self.connection()?.grad_y()?))
    }

    /// Berwald curvature, stored `[i, j, k, l]` for `B_j^i_kl`.
    pub fn berwald(&self) -> Result<&JetTensor, EngineError> {
        self.berwald
            .get_or_try_init(|| Ok(self.christoffel()?.grad_y()?))
    }

    /// `S = dG^m/dy^m`.
    pub fn spray_divergence(&self) -> Result<Jet, EngineError> {
        let n = self.connection()?;
        Ok(sum((0..self.dim()).map(|m| n.get(&[m, m]).clone())))
    }

    /// Mean Berwald curvature `E_jk = 1/2 B_j^m_km`.
    pub fn mean_berwald(&self) -> Result<&JetTensor, EngineError> {
        self.mean_berwald.get_or_try_init(|| {
            let b = self.berwald()?;
            let n = self.dim();
            Ok(Tensor::from_fn(n, vec![Down, Down], |i| {
                sum((0..n).map(|m| b.get(&[m, i[0], i[1], m]).clone())).scale(0.5)
            }))
        })
    }

    /// Douglas tensor from `B - 1/(n+1) d^3(S y^i)`.
    pub fn douglas_definition(&self) -> Result<&JetTensor, EngineError> {
        self.douglas_def.get_or_try_init(|| {
            let n = self.dim();
            let s = self.spray_divergence()?;
            let ys = self.ys(s.spec());
            let sy = Tensor::from_fn(n, vec![Up], |i| &s * &ys[i[0]]);
            let third = sy.grad_y()?.grad_y()?.grad_y()?;
            let b = self.berwald()?;
            let c = 1.0 / (n as f64 + 1.0);
            Ok(Tensor::from_fn(n, vec![Up, Down, Down, Down], |i| {
                b.get(i) - &third.get(i).scale(c)
            }))
        })
    }

    /// Douglas tensor from `B` and the mean Berwald curvature.
    pub fn douglas_d2(&self) -> Result<&JetTensor, EngineError> {
        self.douglas_d2.get_or_try_init(|| {
            let n = self.dim();
            let b = self.berwald()?;
            let e = self.mean_berwald()?;
            let ey = e.grad_y()?;
            let ys = self.ys(ey.spec());
            let c = 2.0 / (n as f64 + 1.0);
            Ok(Tensor::from_fn(n, vec![Up, Down, Down, Down], |idx| {
                let [i, j, k, l] = [idx[0], idx[1], idx[2], idx[3]];
                let mut t = &ys[i] * ey.get(&[j, k, l]);
                for (a, b2, d) in [(j, k, l), (j, l, k), (k, l, j)] {
                    if i == d {
                        t = &t + e.get(&[a, b2]);
                    }
                }
                b.get(idx) - &t.scale(c)
            }))
        })
    }

    /// Horizontal Berwald derivative with a free trailing index `m`.
    pub fn hcov(&self, t: &JetTensor) -> Result<JetTensor, EngineError> {
        lowered(t, "horizontal derivative", 1, 1)?;
        let n = self.dim();
        let nc = self.connection()?;
        let gamma = self.christoffel()?;
        let tx = t.grad_x()?;
        let ty = t.grad_y()?;
        let rank = t.rank();
        let mut variance = t.variance().to_vec();
        variance.push(Down);
        let mut buf = vec![0usize; rank];
        Ok(Tensor::from_fn(n, variance, |idx| {
            let (base, m) = (&idx[..rank], idx[rank]);
            let mut acc = tx.get(idx).clone();
            let mut with = idx.to_vec();
            for r in 0..n {
                with[rank] = r;
                acc = &acc - &(nc.get(&[r, m]) * ty.get(&with));
            }
            for (s, var) in t.variance().iter().enumerate() {
                buf.copy_from_slice(base);
                for r in 0..n {
                    buf[s] = r;
                    let term = match var {
                        Up => gamma.get(&[base[s], r, m]) * t.get(&buf),
                        Down => -&(gamma.get(&[r, base[s], m]) * t.get(&buf)),
                    };
                    acc = &acc + &term;
                }
            }
            acc
        }))
    }

    /// Horizontal derivative contracted with `y`, `T_|0 = T_|m y^m`.
    pub fn hcov_along(&self, t: &JetTensor) -> Result<JetTensor, EngineError> {
        lowered(t, "horizontal derivative", 1, 1)?;
        let n = self.dim();
        let g = self.spray()?;
        let nc = self.connection()?;
        let tx = t.grad_x()?;
        let ty = t.grad_y()?;
        let ys = self.ys(tx.spec());
        let rank = t.rank();
        let mut buf = vec![0usize; rank];
        let mut with = vec![0usize; rank + 1];
        Ok(Tensor::from_fn(n, t.variance().to_vec(), |idx| {
            with[..rank].copy_from_slice(idx);
            let mut acc = None::<Jet>;
            let mut push = |term: Jet| {
                acc = Some(match acc.take() {
                    Some(a) => &a + &term,
                    None => term,
                })
            };
            for m in 0..n {
                with[rank] = m;
                push(&ys[m] * tx.get(&with));
                push((g.get(&[m]) * ty.get(&with)).scale(-2.0));
            }
            for (s, var) in t.variance().iter().enumerate() {
                buf.copy_from_slice(idx);
                for r in 0..n {
                    buf[s] = r;
                    push(match var {
                        Up => nc.get(&[idx[s], r]) * t.get(&buf),
                        Down => -&(nc.get(&[r, idx[s]]) * t.get(&buf)),
                    });
                }
            }
            acc.expect("dimension is positive")
        }))
    }

    /// Riemann curvature `R^i_k`.
    pub fn riemann(&self) -> Result<&JetTensor, EngineError> {
        self.riemann.get_or_try_init(|| {
            let n = self.dim();
            let g = self.spray()?;
            let nc = self.connection()?;
            let gamma = self.christoffel()?;
            let gx = g.grad_x()?;
            let nx = nc.grad_x()?;
            let ys = self.ys(nx.spec());
            Ok(Tensor::from_fn(n, vec![Up, Down], |idx| {
                let [i, k] = [idx[0], idx[1]];
                let mut acc = gx.get(&[i, k]).scale(2.0);
                for j in 0..n {
                    acc = &acc - &(&ys[j] * nx.get(&[i, k, j]));
                    acc = &acc + &(g.get(&[j]) * gamma.get(&[i, j, k])).scale(2.0);
                    acc = &acc - &(nc.get(&[i, j]) * nc.get(&[j, k]));
                }
                acc
            }))
        })
    }

    /// `R_j^i_kl`, stored `[i, j, k, l]`, recovered from `R^i_k`.
    pub fn riemann_full(&self) -> Result<&JetTensor, EngineError> {
        self.riemann_full.get_or_try_init(|| {
            let rk = self.riemann()?;
            let ryy = rk.grad_y()?.grad_y()?;
            Ok(Tensor::from_fn(self.dim(), vec![Up, Down, Down, Down], |idx| {
                let [i, j, k, l] = [idx[0], idx[1], idx[2], idx[3]];
                (ryy.get(&[i, k, j, l]) - ryy.get(&[i, l, j, k])).scale(1.0 / 3.0)
            }))
        })
    }

    /// `B_j^i_ml|k - B_j^i_km|l - R_j^i_kl.m` over all indices.
    pub fn ricci_identity(&self) -> Result<Residual, EngineError> {
        let bh = self.hcov(self.berwald()?)?.values();
        let rd = self.riemann_full()?.grad_y()?.values();
        let n = self.dim();
        let mut residual = 0.0f64;
        for idx in all_indices(n, 5) {
            let [i, j, k, l, m] = [idx[0], idx[1], idx[2], idx[3], idx[4]];
            let r = bh.get(&[i, j, m, l, k]) - bh.get(&[i, j, k, m, l]) - rd.get(&[i, j, k, l, m]);
            residual = residual.max(r.abs());
        }
        Ok(Residual {
            residual,
            scale: bh.max_abs().max(rd.max_abs()),
        })
    }

    /// Contraction and trace identities every metric satisfies, each as
    /// `residual / max(1, |tensor|)`.
    pub fn identity_residuals(&self) -> Result<IdentityResiduals, EngineError> {
        let n = self.dim();
        let y = &self.point.y;
        let rel = |r: f64, s: f64| r / s.max(1.0);
        let contract = |id: TensorId| -> Result<f64, EngineError> {
            let t = self.tensor(id)?;
            let rank = t.variance.len();
            let mut worst = 0.0f64;
            for idx in all_indices(n, rank - 1) {
                let mut full = idx.clone();
                full.push(0);
                let mut acc = 0.0;
                for k in 0..n {
                    full[rank - 1] = k;
                    acc += t.get(&full) * y[k];
                }
                worst = worst.max(acc.abs());
            }
            Ok(rel(worst, t.max_abs()))
        };

        let f2 = self.f2()?.value();
        let yl = self.y_lower()?;
        let gyy: f64 = (0..n).map(|i| yl[i] * y[i]).sum();

        let spray = self.spray()?.values();
        let conn = self.connection()?.values();
        let ny = (0..n)
            .map(|i| ((0..n).map(|j| conn.get(&[i, j]) * y[j]).sum::<f64>() - 2.0 * spray.get(&[i])).abs())
            .fold(0.0, f64::max);

        let d = self.douglas_definition()?.values();
        let mut trace = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                trace = trace.max((0..n).map(|m| d.get(&[m, j, k, m])).sum::<f64>().abs());
            }
        }

        let h = self.angular()?;
        let mut idem = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                let hh: f64 = (0..n).map(|m| h.get(&[i, m]) * h.get(&[m, k])).sum();
                idem = idem.max((hh - h.get(&[i, k])).abs());
            }
        }

        Ok(IdentityResiduals {
            g_yy: rel((gyy - f2).abs(), f2),
            cartan_y: contract(TensorId::Cartan)?,
            connection_y: rel(ny, conn.max_abs()),
            berwald_y: contract(TensorId::Berwald)?,
            riemann_y: contract(TensorId::Riemann)?,
            douglas_trace: rel(trace, d.max_abs()),
            angular_idempotent: idem,
        })
    }

    /// `y_i = g_ij y^j` at the base point.
    pub fn y_lower(&self) -> Result<Vec<f64>, EngineError> {
        let g = self.g()?.values();
        let n = self.dim();
        Ok((0..n)
            .map(|i| (0..n).map(|j| g.get(&[i, j]) * self.point.y[j]).sum())
            .collect())
    }

    /// Angular metric `h^i_k = delta - y^i y_k / F^2`. Without a metric the
    /// Euclidean projector orthogonal to `y` is used; both share the kernel
    /// spanned by `y`.
    pub fn angular(&self) -> Result<Tensor<f64>, EngineError> {
        let n = self.dim();
        let y = &self.point.y;
        let (low, f2): (Vec<f64>, f64) = if self.has_metric() {
            (self.y_lower()?, self.f2()?.value())
        } else {
            (y.clone(), y.iter().map(|v| v * v).sum())
        };
        Ok(Tensor::from_fn(n, vec![Up, Down], |i| {
            delta(i[0], i[1]) - y[i[0]] * low[i[1]] / f2
        }))
    }

    /// Landsberg curvature `L_jkl = -1/2 y_i B_j^i_kl`.
    pub fn landsberg(&self) -> Result<Tensor<f64>, EngineError> {
        let yl = self.y_lower()?;
        let b = self.berwald()?.values();
        let n = self.dim();
        Ok(Tensor::from_fn(n, vec![Down, Down, Down], |idx| {
            -0.5 * (0..n)
                .map(|i| yl[i] * b.get(&[i, idx[0], idx[1], idx[2]]))
                .sum::<f64>()
        }))
    }

    /// `H_jk = E_jk|0`.
    pub fn h_curvature(&self) -> Result<JetTensor, EngineError> {
        self.hcov_along(self.mean_berwald()?)
    }

    /// `h^i_r T_j^r_kl` for a rank-4 tensor stored `[r, j, k, l]`.
    pub fn project(&self, t: &Tensor<f64>) -> Result<Tensor<f64>, EngineError> {
        let h = self.angular()?;
        let n = self.dim();
        Ok(Tensor::from_fn(n, t.variance().to_vec(), |idx| {
            (0..n)
                .map(|r| h.get(&[idx[0], r]) * t.get(&[r, idx[1], idx[2], idx[3]]))
                .sum()
        }))
    }

    /// `h^i_r B_j^r_kl|0`.
    pub fn gbw_tensor(&self) -> Result<Tensor<f64>, EngineError> {
        self.project(&self.hcov_along(self.berwald()?)?.values())
    }

    /// `h^i_r D_j^r_kl|0`.
    pub fn gdw_tensor(&self) -> Result<Tensor<f64>, EngineError> {
        self.project(&self.hcov_along(self.douglas_definition()?)?.values())
    }

    /// `dR_j^i_kl/dy^m`.
    pub fn riemann_full_y(&self) -> Result<Tensor<f64>, EngineError> {
        Ok(self.riemann_full()?.grad_y()?.values())
    }

    /// `W~^i_k` with `K_jk = R_j^m_mk`.
    pub fn wtilde(&self) -> Result<Tensor<f64>, EngineError> {
        let n = self.dim();
        if n < 2 {
            return Err(EngineError::Dimension {
                expected: 2,
                found: n,
            });
        }
        let rf = self.riemann_full()?;
        let k = Tensor::from_fn(n, vec![Down, Down], |i| {
            sum((0..n).map(|m| rf.get(&[m, i[0], m, i[1]]).clone()))
        });
        let ky = k.grad_y()?.values();
        let k = k.values();
        let y = &self.point.y;
        let kt = Tensor::from_fn(n, vec![Down, Down], |i| {
            let [j, kk] = [i[0], i[1]];
            n as f64 * k.get(&[j, kk])
                + k.get(&[kk, j])
                + (0..n).map(|r| y[r] * ky.get(&[kk, r, j])).sum::<f64>()
        });
        let kt0: Vec<f64> = (0..n)
            .map(|kk| (0..n).map(|j| y[j] * kt.get(&[j, kk])).sum())
            .collect();
        let kt00: f64 = (0..n).map(|kk| y[kk] * kt0[kk]).sum();
        let rk = self.riemann()?.values();
        let c = 1.0 / (1.0 - (n * n) as f64);
        Ok(Tensor::from_fn(n, vec![Up, Down], |i| {
            let [a, b] = [i[0], i[1]];
            rk.get(&[a, b]) - c * (y[a] * kt0[b] - delta(a, b) * kt00)
        }))
    }

    /// `K = R^m_m / ((n-1) F^2)` and the isotropy residual
    /// `max |R^i_k - K (F^2 delta - y^i y_k)|`.
    pub fn scalar_curvature(&self) -> Result<(f64, Residual), EngineError> {
        let n = self.dim();
        let rk = self.riemann()?.values();
        let f2 = self.f2()?.value();
        let yl = self.y_lower()?;
        let trace: f64 = (0..n).map(|m| rk.get(&[m, m])).sum();
        let kappa = trace / ((n as f64 - 1.0) * f2);
        let y = &self.point.y;
        let mut residual = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                let model = kappa * (f2 * delta(i, k) - y[i] * yl[k]);
                residual = residual.max((rk.get(&[i, k]) - model).abs());
            }
        }
        Ok((
            kappa,
            Residual {
                residual,
                scale: rk.max_abs(),
            },
        ))
    }

    /// Values of a named tensor at the base point.
    pub fn tensor(&self, id: TensorId) -> Result<TensorValue, EngineError> {
        let p = (*self.point).clone();
        let t = match id {
            TensorId::Fundamental => self.g()?.values(),
            TensorId::Cartan => {
                let g = self.g()?;
                lowered(g, "C", 0, 1)?;
                let c = g.grad_y()?.values();
                c.map(|v| 0.5 * v)
            }
            TensorId::Spray => self.spray()?.values(),
            TensorId::Connection => self.connection()?.values(),
            TensorId::Berwald => self.berwald()?.values(),
            TensorId::MeanBerwald => self.mean_berwald()?.values(),
            TensorId::HCurvature => self.h_curvature()?.values(),
            TensorId::Douglas => self.douglas_definition()?.values(),
            TensorId::Riemann => self.riemann()?.values(),
            TensorId::RiemannFull => self.riemann_full()?.values(),
            TensorId::Landsberg => self.landsberg()?,
            TensorId::Wtilde => self.wtilde()?,
            TensorId::Angular => self.angular()?,
        };
        Ok(TensorValue::new(id.symbol(), id.y_degree(), p, t))
    }
}

/// Every index tuple of the given rank, in storage order.
pub(crate) fn all_indices(dim: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..dim.pow(rank as u32)).map(move |k| {
        let mut idx = vec![0; rank];
        super::tensor::unflatten(k, dim, &mut idx);
        idx
    })
}

/// `G^i` at a plain point; needs `F^2` to x-order 1 and y-order 2 only.
pub fn spray_at(source: &dyn SpraySource, x: &[f64], y: &[f64]) -> Result<Vec<f64>, EngineError> {
    let n = source.dim();
    let point = Point::new(x.to_vec(), y.to_vec());
    point.check_admissible()?;
    if !source.domain().contains(x) {
        return Err(EngineError::OutsideDomain);
    }
    let jets = source.spray_jets(JetSpec::new(n, 0, 0)?, &point)?;
    Ok(jets.iter().map(Jet::value).collect())
}
