//! Projective changes `G~ = G + P y` of sprays, the C-projective condition and
//! invariance checks on certified metric pairs.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::classifier::{evaluate, ClassifierConfig, PredicateId, PredicateResult, Verdict};
use crate::jets::{div_meet, Coordinate, Jet, JetSpec, Point};
use crate::metric_lang::{
    build, coordinate_jets, eval_as_jet, eval_f, eval_root, parse, DeclaredForm, MetricExpr, ParamValue,
    Params,
};
use crate::metric_library::{catalog_get, CatalogError, ChartDomain, MetricDef};
use crate::tensor_engine::{
    integrate_geodesic, EngineError, Geometry, GeodesicSample, JetTensor, MetricSource, SpraySource,
    Tensor, Variance,
};

/// Residual ratio band within which two failing residuals count as invariant.
pub const RATIO_BAND: (f64, f64) = (0.1, 10.0);

pub const FIXTURE_NAMES: [&str; 4] = ["funk", "bryant", "identity", "twisted"];

#[derive(Debug, Error)]
pub enum ProjectiveError {
    #[error("unknown projective fixture `{0}` (known: {known})", known = FIXTURE_NAMES.join(", "))]
    UnknownFixture(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A positively 1-homogeneous scalar field `P(x, y)`.
#[derive(Debug, Clone)]
pub enum ProjectiveFactor {
    Zero,
    /// `P` is the value of the root expression.
    Field { expr: MetricExpr, domain: ChartDomain },
    /// `P = y^k dF/dx^k / (2F)` of a metric, the factor of a projectively
    /// flat metric relative to the Euclidean spray.
    HalfLogRadial { metric: MetricExpr, domain: ChartDomain },
}

impl ProjectiveFactor {
    pub fn domain(&self) -> ChartDomain {
        match self {
            ProjectiveFactor::Zero => ChartDomain::Everywhere,
            ProjectiveFactor::Field { domain, .. } | ProjectiveFactor::HalfLogRadial { domain, .. } => *domain,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ProjectiveFactor::Zero => "P = 0".into(),
            ProjectiveFactor::Field { expr, .. } => format!("P = {}", expr.root),
            ProjectiveFactor::HalfLogRadial { metric, .. } => {
                format!("P = y^k dF/dx^k / (2F) with F from {}", metric.root)
            }
        }
    }

    /// Jet of `P` with the given spec.
    pub fn jet(&self, spec: JetSpec, point: &Point) -> Result<Jet, EngineError> {
        match self {
            ProjectiveFactor::Zero => {
                let (xs, _) = coordinate_jets(spec, point)?;
                Ok(xs[0].like(0.0))
            }
            ProjectiveFactor::Field { expr, .. } => {
                let (xs, ys) = coordinate_jets(spec, point)?;
                Ok(eval_root(expr, &xs, &ys)?)
            }
            ProjectiveFactor::HalfLogRadial { metric, .. } => {
                let raised = JetSpec::new(spec.dim, spec.kx + 1, spec.ky)?;
                let f = eval_as_jet(metric, raised, point)?.sqrt()?;
                let mut radial = f.like(0.0);
                for k in 0..spec.dim {
                    let y = Jet::lift(raised, f.base().clone(), Coordinate::Y(k))?;
                    radial = &radial + &(&y * &f.dx(k)?);
                }
                Ok(div_meet(&radial, &f.scale(2.0))?)
            }
        }
    }

    /// Max over samples and `lambda` in {0.5, 2, 3} of `|P(x, lambda y) - lambda P(x, y)|`.
    pub fn homogeneity_residual(&self, samples: &[Point]) -> Result<f64, EngineError> {
        let mut worst = 0.0f64;
        for p in samples {
            let spec = JetSpec::new(p.dim(), 0, 0)?;
            let base = self.jet(spec, p)?.value();
            for lambda in [0.5, 2.0, 3.0] {
                let q = Point::new(p.x.clone(), p.y.iter().map(|v| lambda * v).collect());
                let scaled = self.jet(spec, &q)?.value();
                worst = worst.max((scaled - lambda * base).abs());
            }
        }
        Ok(worst)
    }
}

/// The spray `G + P y`; it carries no metric.
pub struct ProjectiveSource<'a> {
    pub base: &'a dyn SpraySource,
    pub factor: &'a ProjectiveFactor,
}

impl SpraySource for ProjectiveSource<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn domain(&self) -> ChartDomain {
        self.base.domain().intersect(self.factor.domain())
    }

    fn f2_jet(&self, _: JetSpec, _: &Point) -> Result<Jet, EngineError> {
        Err(EngineError::NoMetric("F^2"))
    }

    fn has_metric(&self) -> bool {
        false
    }

    fn spray_jets(&self, spec: JetSpec, point: &Point) -> Result<Vec<Jet>, EngineError> {
        let g = self.base.spray_jets(spec, point)?;
        let p = self.factor.jet(spec, point)?;
        Ok(g
            .iter()
            .enumerate()
            .map(|(i, gi)| {
                let y = Jet::lift(spec, p.base().clone(), Coordinate::Y(i)).expect("admissible point");
                gi + &(&p * &y)
            })
            .collect())
    }
}

/// `Q_i = dP/dx^i - N^m_i dP/dy^m - P dP/dy^i` as jets.
fn q_vector(geo: &Geometry, p: &Jet) -> Result<Vec<Jet>, EngineError> {
    let n = geo.dim();
    let nc = geo.connection()?;
    let py: Vec<Jet> = (0..n).map(|m| p.dy(m)).collect::<Result<_, _>>()?;
    (0..n)
        .map(|i| {
            let mut q = &p.dx(i)? - &(p * &py[i]);
            for m in 0..n {
                q = &q - &(nc.get(&[m, i]) * &py[m]);
            }
            Ok(q)
        })
        .collect()
}

/// `Q_ij = dQ_j/dy^i - dQ_i/dy^j` as jets.
fn q_matrix(geo: &Geometry, p: &Jet) -> Result<JetTensor, EngineError> {
    let q = q_vector(geo, p)?;
    let n = geo.dim();
    Tensor::try_from_fn(n, vec![Variance::Down, Variance::Down], |i| {
        Ok(&q[i[1]].dy(i[0])? - &q[i[0]].dy(i[1])?)
    })
}

/// Spec of `P` matched to the spray budget of `geo`.
fn factor_spec(geo: &Geometry) -> Result<JetSpec, EngineError> {
    geo.orders()
        .lowered(1, 2)
        .ok_or(EngineError::InsufficientOrder {
            tensor: "P",
            spec: geo.orders(),
        })
}

/// `P_jk` and `P_jkl` as jets.
fn factor_hessians(p: &Jet, n: usize) -> Result<(JetTensor, JetTensor), EngineError> {
    let scalar = Tensor::from_fn(n, vec![], |_| p.clone());
    let p2 = scalar.grad_y()?.grad_y()?;
    let p3 = p2.grad_y()?;
    Ok((p2, p3))
}

/// Residuals of one sample of a pair.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PairResiduals {
    pub q: f64,
    pub q_scale: f64,
    pub douglas_difference: f64,
    pub douglas_scale: f64,
    pub ber_identity: f64,
    pub e_shift: f64,
    pub p_identity: f64,
    pub h_difference: f64,
    pub spray_match: Option<f64>,
}

impl PairResiduals {
    fn max(self, o: Self) -> Self {
        Self {
            q: self.q.max(o.q),
            q_scale: self.q_scale.max(o.q_scale),
            douglas_difference: self.douglas_difference.max(o.douglas_difference),
            douglas_scale: self.douglas_scale.max(o.douglas_scale),
            ber_identity: self.ber_identity.max(o.ber_identity),
            e_shift: self.e_shift.max(o.e_shift),
            p_identity: self.p_identity.max(o.p_identity),
            h_difference: self.h_difference.max(o.h_difference),
            spray_match: match (self.spray_match, o.spray_match) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
        }
    }
}

/// Max `|Q_ij|` over indices and samples, with the largest `|dP/dx|` as scale.
pub fn cproj_residual(
    source: &dyn SpraySource,
    factor: &ProjectiveFactor,
    samples: &[Point],
    orders: JetSpec,
) -> Result<(f64, f64), EngineError> {
    let per: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|pt| {
            let geo = Geometry::new(source, pt.clone(), orders)?;
            let p = factor.jet(factor_spec(&geo)?, pt)?;
            let q = q_matrix(&geo, &p)?.values().max_abs();
            let scale = (0..geo.dim()).map(|i| p.dx(i).map(|d| d.value().abs())).try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))?;
            Ok((q, scale))
        })
        .collect::<Result<_, EngineError>>()?;
    Ok(per.iter().fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1))))
}

fn pair_residuals_at(
    source: &dyn SpraySource,
    factor: &ProjectiveFactor,
    target: Option<&MetricSource>,
    point: &Point,
    orders: JetSpec,
) -> Result<PairResiduals, EngineError> {
    let transformed = ProjectiveSource { base: source, factor };
    let gs = Geometry::new(source, point.clone(), orders)?;
    let gt = Geometry::new(&transformed, point.clone(), orders)?;
    let n = gs.dim();
    let y = &point.y;
    let p = factor.jet(factor_spec(&gs)?, point)?;
    let (p2, p3) = factor_hessians(&p, n)?;
    let (p2v, p3v) = (p2.values(), p3.values());
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    let q = q_matrix(&gs, &p)?;
    let q_scale = (0..n).map(|i| p.dx(i).map(|d| d.value().abs())).try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))?;

    let ds = gs.douglas_definition()?.values();
    let dt = gt.douglas_definition()?.values();

    let bs = gs.berwald()?.values();
    let bt = gt.berwald()?.values();
    let ber = Tensor::from_fn(n, bs.variance().to_vec(), |idx| {
        let [i, j, k, l] = [idx[0], idx[1], idx[2], idx[3]];
        let model = p2v.get(&[j, k]) * delta(i, l)
            + p2v.get(&[j, l]) * delta(i, k)
            + p2v.get(&[k, l]) * delta(i, j)
            + p3v.get(&[j, k, l]) * y[i];
        bt.get(idx) - bs.get(idx) - model
    });

    let es = gs.mean_berwald()?.values();
    let et = gt.mean_berwald()?.values();
    let half = (n as f64 + 1.0) / 2.0;
    let e_shift = Tensor::from_fn(n, es.variance().to_vec(), |i| {
        et.get(i) - es.get(i) - half * p2v.get(i)
    });

    // P_jk|0 = y^m Q_jm.k
    let p2_along = gs.hcov_along(&p2)?.values();
    let qy = q.grad_y()?.values();
    let p_identity = Tensor::from_fn(n, p2_along.variance().to_vec(), |i| {
        let [j, k] = [i[0], i[1]];
        let rhs: f64 = (0..n).map(|m| y[m] * qy.get(&[j, m, k])).sum();
        p2_along.get(i) - rhs
    });

    let hs = gs.h_curvature()?.values();
    let ht = gt.h_curvature()?.values();

    let spray_match = match target {
        Some(t) => {
            let gm = Geometry::new(t, point.clone(), JetSpec::new(n, 1, 2)?)?;
            let expected = gm.spray()?.values();
            let got = gt.spray()?.values();
            Some(got.max_abs_diff(&expected))
        }
        None => None,
    };

    Ok(PairResiduals {
        q: q.values().max_abs(),
        q_scale,
        douglas_difference: dt.max_abs_diff(&ds),
        douglas_scale: ds.max_abs().max(dt.max_abs()),
        ber_identity: ber.max_abs(),
        e_shift: e_shift.max_abs(),
        p_identity: p_identity.max_abs(),
        h_difference: ht.max_abs_diff(&hs),
        spray_match,
    })
}

/// A source metric, a projective factor and optionally the metric whose
/// spray the transformed spray should reproduce.
#[derive(Debug, Clone)]
pub struct ProjectivePair {
    pub name: String,
    pub source: MetricDef,
    pub factor: ProjectiveFactor,
    pub target: Option<MetricDef>,
    /// Metric whose domain and sampling radius define the samples.
    pub sampling: MetricDef,
}

fn scaled_root(def: &MetricDef, c: f64) -> MetricExpr {
    assert_eq!(def.expr.form, DeclaredForm::F);
    let mut e = def.expr.clone();
    e.root = build::mul(build::num(c), e.root);
    e.form = DeclaredForm::F;
    e
}

/// Certified fixtures plus a non-C-projective control.
pub fn fixture(name: &str, dim: usize) -> Result<ProjectivePair, ProjectiveError> {
    let euclid = catalog_get("euclidean", dim, &Params::new())?;
    Ok(match name {
        "funk" => {
            let funk = catalog_get("funk", dim, &Params::new())?;
            ProjectivePair {
                name: name.into(),
                source: euclid,
                factor: ProjectiveFactor::Field {
                    expr: scaled_root(&funk, 0.5),
                    domain: funk.domain,
                },
                sampling: funk.clone(),
                target: Some(funk),
            }
        }
        "bryant" => {
            let bryant = catalog_get("bryant", dim, &Params::new())?;
            ProjectivePair {
                name: name.into(),
                source: euclid,
                factor: ProjectiveFactor::HalfLogRadial {
                    metric: bryant.expr.clone(),
                    domain: bryant.domain,
                },
                sampling: bryant.clone(),
                target: Some(bryant),
            }
        }
        "identity" => ProjectivePair {
            name: name.into(),
            source: euclid.clone(),
            factor: ProjectiveFactor::Zero,
            target: Some(euclid.clone()),
            sampling: euclid,
        },
        "twisted" => {
            let mut params = Params::new();
            let mut pv = vec![0.0; dim];
            let mut qv = vec![0.0; dim];
            pv[0] = 0.3;
            qv[1] = 0.4;
            params.insert("p".into(), ParamValue::Vector(pv));
            params.insert("q".into(), ParamValue::Vector(qv));
            let expr = parse(
                "dot(p, x) * dot(q, y) - dot(q, x) * dot(p, y)",
                DeclaredForm::F,
                &params,
            )
            .map_err(CatalogError::from)?;
            ProjectivePair {
                name: name.into(),
                source: euclid.clone(),
                factor: ProjectiveFactor::Field {
                    expr,
                    domain: ChartDomain::Everywhere,
                },
                target: None,
                sampling: euclid,
            }
        }
        other => return Err(ProjectiveError::UnknownFixture(other.into())),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InvarianceStatus {
    Holds,
    Broken,
    /// The claim needs a C-projective change and the factor is not one.
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub predicate: PredicateId,
    pub source: PredicateResult,
    pub transformed: Option<PredicateResult>,
    pub status: InvarianceStatus,
    pub note: String,
}

/// Compares a predicate on the source and transformed sprays.
pub fn verify_invariance(
    pair: &ProjectivePair,
    predicate: PredicateId,
    samples: &[Point],
    cfg: &ClassifierConfig,
) -> Result<InvarianceReport, EngineError> {
    let source = MetricSource::new(&pair.source);
    let transformed = ProjectiveSource {
        base: &source,
        factor: &pair.factor,
    };
    let before = evaluate(&source, samples, cfg, &[predicate])?.remove(0);
    let needs_c_projective = matches!(predicate, PredicateId::Gbw | PredicateId::HVanishes);
    if needs_c_projective {
        let (q, _) = cproj_residual(&source, &pair.factor, samples, cfg.orders)?;
        if q >= cfg.tol {
            return Ok(InvarianceReport {
                predicate,
                source: before,
                transformed: None,
                status: InvarianceStatus::Skipped,
                note: format!("not C-projective: max |Q_ij| = {q:.3e}"),
            });
        }
    }
    let after = evaluate(&transformed, samples, cfg, &[predicate])?.remove(0);
    let (status, note) = match (before.verdict, after.verdict) {
        (Verdict::Holds, Verdict::Holds) => (InvarianceStatus::Holds, "both hold".to_string()),
        (Verdict::Fails, Verdict::Fails) => {
            let ratio = after.residual / before.residual;
            let inside = (RATIO_BAND.0..=RATIO_BAND.1).contains(&ratio);
            let status = if inside {
                InvarianceStatus::Holds
            } else {
                InvarianceStatus::Broken
            };
            (status, format!("both fail, residual ratio {ratio:.3}"))
        }
        (a, b) => (
            InvarianceStatus::Broken,
            format!("verdicts differ: {a:?} vs {b:?}"),
        ),
    };
    Ok(InvarianceReport {
        predicate,
        source: before,
        transformed: Some(after),
        status,
        note,
    })
}

/// Largest distance from a point of `path` to the polyline `reference`.
pub fn path_deviation(path: &[GeodesicSample], reference: &[GeodesicSample]) -> f64 {
    let segment_distance = |p: &[f64], a: &[f64], b: &[f64]| -> f64 {
        let ab: Vec<f64> = a.iter().zip(b).map(|(u, v)| v - u).collect();
        let ap: Vec<f64> = a.iter().zip(p).map(|(u, v)| v - u).collect();
        let len2: f64 = ab.iter().map(|v| v * v).sum();
        let t = if len2 > 0.0 {
            (ap.iter().zip(&ab).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        ap.iter()
            .zip(&ab)
            .map(|(u, v)| (u - t * v).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    path.iter()
        .map(|s| {
            reference
                .windows(2)
                .map(|w| segment_distance(&s.x, &w[0].x, &w[1].x))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn arc_length(path: &[GeodesicSample]) -> f64 {
    path.windows(2)
        .map(|w| {
            w[0].x
                .iter()
                .zip(&w[1].x)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// Integrates both sprays from `(x0, y0)` and measures how far the
/// transformed path strays from the source path as a point set.
pub fn geodesic_deviation(
    pair: &ProjectivePair,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<f64, crate::tensor_engine::GeodesicError> {
    let source = MetricSource::new(&pair.source);
    let transformed = ProjectiveSource {
        base: &source,
        factor: &pair.factor,
    };
    let moved = integrate_geodesic(&transformed, x0, y0, t_end, steps)?;
    let needed = arc_length(&moved);
    // extend the reference until it covers the transformed path
    let mut t = t_end;
    loop {
        let reference = integrate_geodesic(&source, x0, y0, t, steps)?;
        let have = arc_length(&reference);
        if have >= needed || t > 64.0 * t_end {
            return Ok(path_deviation(&moved, &reference));
        }
        t *= 1.5 * needed / have.max(1e-12);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub pair: String,
    pub factor: String,
    pub samples: usize,
    pub p_homogeneity: f64,
    pub q_residual: f64,
    pub c_projective: bool,
    pub residuals: PairResiduals,
    pub geodesic_deviation: Option<f64>,
    pub invariance: Vec<InvarianceReport>,
}

/// Runs every check of a pair at the given samples.
pub fn verify_pair(
    pair: &ProjectivePair,
    samples: &[Point],
    cfg: &ClassifierConfig,
) -> Result<VerificationReport, EngineError> {
    let source = MetricSource::new(&pair.source);
    let target = pair.target.as_ref().map(MetricSource::new);
    let per: Vec<PairResiduals> = samples
        .par_iter()
        .map(|p| pair_residuals_at(&source, &pair.factor, target.as_ref(), p, cfg.orders))
        .collect::<Result<_, _>>()?;
    let residuals = per
        .into_iter()
        .reduce(PairResiduals::max)
        .unwrap_or_default();
    let invariance = [
        PredicateId::Douglas,
        PredicateId::Gdw,
        PredicateId::Gbw,
        PredicateId::HVanishes,
    ]
    .iter()
    .map(|&id| verify_invariance(pair, id, samples, cfg))
    .collect::<Result<Vec<_>, _>>()?;
    let geodesic_deviation = samples
        .first()
        .and_then(|p| geodesic_deviation(pair, &p.x, &p.y, 0.5, 200).ok());
    Ok(VerificationReport {
        pair: pair.name.clone(),
        factor: pair.factor.describe(),
        samples: samples.len(),
        p_homogeneity: pair.factor.homogeneity_residual(samples)?,
        q_residual: residuals.q,
        c_projective: residuals.q < cfg.tol,
        residuals,
        geodesic_deviation,
        invariance,
    })
}

/// Funk PDE residual `max |dF/dx^k - F dF/dy^k|` at the samples.
pub fn funk_pde_residual(def: &MetricDef, samples: &[Point]) -> Result<f64, EngineError> {
    let mut worst = 0.0f64;
    for p in samples {
        let spec = JetSpec::new(p.dim(), 1, 1)?;
        let f = eval_as_jet(&def.expr, spec, p)?.sqrt()?;
        let value = eval_f(&def.expr, &p.x, &p.y)?;
        for k in 0..p.dim() {
            let r = f.dx(k)?.value() - value * f.dy(k)?.value();
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}
