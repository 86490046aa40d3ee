//! Predicates over sampled points and theorem consistency checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::jets::{JetSpec, Point};
use crate::tensor_engine::{EngineError, Geometry, Residual, SpraySource, Tensor};

pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateId {
    Berwald,
    WeaklyBerwald,
    Douglas,
    Gdw,
    Gbw,
    HVanishes,
    RQuadratic,
    ScalarCurvature,
    ConstantCurvature,
    WtildeVanishes,
}

impl PredicateId {
    pub const ALL: [PredicateId; 10] = [
        PredicateId::Berwald,
        PredicateId::WeaklyBerwald,
        PredicateId::Douglas,
        PredicateId::Gdw,
        PredicateId::Gbw,
        PredicateId::HVanishes,
        PredicateId::RQuadratic,
        PredicateId::ScalarCurvature,
        PredicateId::ConstantCurvature,
        PredicateId::WtildeVanishes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredicateId::Berwald => "berwald",
            PredicateId::WeaklyBerwald => "weakly_berwald",
            PredicateId::Douglas => "douglas",
            PredicateId::Gdw => "gdw",
            PredicateId::Gbw => "gbw",
            PredicateId::HVanishes => "h_vanishes",
            PredicateId::RQuadratic => "r_quadratic",
            PredicateId::ScalarCurvature => "scalar_curvature",
            PredicateId::ConstantCurvature => "constant_curvature",
            PredicateId::WtildeVanishes => "wtilde_vanishes",
        }
    }

    /// Predicates that need `F^2` and not only the spray.
    pub fn needs_metric(self) -> bool {
        matches!(
            self,
            PredicateId::ScalarCurvature | PredicateId::ConstantCurvature
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Indeterminate,
}

impl Verdict {
    /// `holds` below `tol * max(1, scale)`, `indeterminate` up to ten times that.
    pub fn judge(residual: f64, scale: f64, tol: f64) -> Self {
        let bound = tol * scale.max(1.0);
        if residual < bound {
            Verdict::Holds
        } else if residual <= 10.0 * bound {
            Verdict::Indeterminate
        } else {
            Verdict::Fails
        }
    }

    fn truth(self) -> Option<bool> {
        match self {
            Verdict::Holds => Some(true),
            Verdict::Fails => Some(false),
            Verdict::Indeterminate => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PredicateResult {
    pub id: PredicateId,
    pub name: &'static str,
    /// Max-norm over samples and indices.
    pub residual: f64,
    pub scale: f64,
    pub tol: f64,
    pub verdict: Verdict,
    pub samples_used: usize,
    pub worst_sample: usize,
    pub per_sample: Vec<f64>,
}

impl PredicateResult {
    /// Verdict of the stored residuals at another tolerance.
    pub fn verdict_at(&self, tol: f64) -> Verdict {
        Verdict::judge(self.residual, self.scale, tol)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifierConfig {
    pub tol: f64,
    pub orders: JetSpec,
}

impl ClassifierConfig {
    pub fn new(dim: usize) -> Self {
        Self {
            tol: DEFAULT_TOL,
            orders: JetSpec::full(dim),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Measured {
    residual: f64,
    scale: f64,
}

fn measure(t: &Tensor<f64>, reference: f64) -> Measured {
    Measured {
        residual: t.max_abs(),
        scale: reference,
    }
}

/// Residuals of the requested predicates at one point. Constant curvature
/// is reduced across samples, so only `K` is recorded here.
fn at_point(
    source: &dyn SpraySource,
    point: &Point,
    cfg: &ClassifierConfig,
    ids: &[PredicateId],
) -> Result<(Vec<Measured>, Option<f64>), EngineError> {
    let geo = Geometry::new(source, point.clone(), cfg.orders)?;
    let mut kappa = None;
    let mut out = Vec::with_capacity(ids.len());
    for &id in ids {
        let m = match id {
            PredicateId::Berwald => {
                measure(&geo.berwald()?.values(), geo.christoffel()?.values().max_abs())
            }
            PredicateId::WeaklyBerwald => {
                measure(&geo.mean_berwald()?.values(), geo.berwald()?.values().max_abs())
            }
            PredicateId::Douglas => {
                measure(&geo.douglas_definition()?.values(), geo.berwald()?.values().max_abs())
            }
            PredicateId::Gdw => {
                let along = geo.hcov_along(geo.douglas_definition()?)?.values();
                measure(&geo.project(&along)?, along.max_abs())
            }
            PredicateId::Gbw => {
                let along = geo.hcov_along(geo.berwald()?)?.values();
                measure(&geo.project(&along)?, along.max_abs())
            }
            PredicateId::HVanishes => {
                measure(&geo.h_curvature()?.values(), geo.mean_berwald()?.values().max_abs())
            }
            PredicateId::RQuadratic => {
                measure(&geo.riemann_full_y()?, geo.riemann_full()?.values().max_abs())
            }
            PredicateId::ScalarCurvature | PredicateId::ConstantCurvature => {
                let (k, r) = geo.scalar_curvature()?;
                kappa = Some(k);
                Measured {
                    residual: r.residual,
                    scale: r.scale,
                }
            }
            PredicateId::WtildeVanishes => {
                measure(&geo.wtilde()?, geo.riemann()?.values().max_abs())
            }
        };
        out.push(m);
    }
    Ok((out, kappa))
}

/// Evaluates `ids` over `samples` (in parallel, reduced in sample order).
pub fn evaluate(
    source: &dyn SpraySource,
    samples: &[Point],
    cfg: &ClassifierConfig,
    ids: &[PredicateId],
) -> Result<Vec<PredicateResult>, EngineError> {
    let per_point: Vec<(Vec<Measured>, Option<f64>)> = samples
        .par_iter()
        .map(|p| at_point(source, p, cfg, ids))
        .collect::<Result<_, _>>()?;
    let kappas: Vec<f64> = per_point.iter().filter_map(|(_, k)| *k).collect();
    Ok(ids
        .iter()
        .enumerate()
        .map(|(slot, &id)| {
            let per_sample: Vec<f64> = per_point.iter().map(|(m, _)| m[slot].residual).collect();
            let (mut residual, mut worst) = (0.0f64, 0usize);
            for (k, &r) in per_sample.iter().enumerate() {
                if r > residual || r.is_nan() {
                    residual = r;
                    worst = k;
                }
            }
            let mut scale = per_point.iter().fold(0.0f64, |s, (m, _)| s.max(m[slot].scale));
            if id == PredicateId::ConstantCurvature {
                let (spread, mean) = dispersion(&kappas);
                // isotropy is a prerequisite for a constant curvature
                let iso = residual / scale.max(1.0);
                residual = spread.max(iso);
                scale = mean.abs();
            }
            PredicateResult {
                id,
                name: id.name(),
                residual,
                scale,
                tol: cfg.tol,
                verdict: Verdict::judge(residual, scale, cfg.tol),
                samples_used: samples.len(),
                worst_sample: worst,
                per_sample,
            }
        })
        .collect())
}

/// Population standard deviation and mean.
fn dispersion(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / v.len() as f64;
    (var.sqrt(), mean)
}

/// Flag-curvature values `K = R^m_m / ((n-1) F^2)` at the samples.
pub fn flag_curvatures(
    source: &dyn SpraySource,
    samples: &[Point],
    cfg: &ClassifierConfig,
) -> Result<Vec<f64>, EngineError> {
    samples
        .par_iter()
        .map(|p| Ok(Geometry::new(source, p.clone(), cfg.orders)?.scalar_curvature()?.0))
        .collect()
}

/// `max |S - (n+1)<a,x>F|` with `S = dG^m/dy^m`, the spray divergence.
/// Returns the residual and `max |S|`.
pub fn s_identity(
    source: &dyn SpraySource,
    samples: &[Point],
    a: &[f64],
    orders: JetSpec,
) -> Result<Residual, EngineError> {
    let per: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|p| {
            let geo = Geometry::new(source, p.clone(), orders)?;
            let s = geo.spray_divergence()?.value();
            let f = geo.f2()?.value().sqrt();
            let ax: f64 = a.iter().zip(&p.x).map(|(u, v)| u * v).sum();
            Ok(((s - (p.dim() as f64 + 1.0) * ax * f).abs(), s.abs()))
        })
        .collect::<Result<_, EngineError>>()?;
    Ok(per.into_iter().fold(
        Residual {
            residual: 0.0,
            scale: 0.0,
        },
        |acc, (r, s)| Residual {
            residual: acc.residual.max(r),
            scale: acc.scale.max(s),
        },
    ))
}

macro_rules! single_predicate {
    ($($fn_name:ident => $id:ident),* $(,)?) => {$(
        pub fn $fn_name(
            source: &dyn SpraySource,
            samples: &[Point],
            cfg: &ClassifierConfig,
        ) -> Result<PredicateResult, EngineError> {
            Ok(evaluate(source, samples, cfg, &[PredicateId::$id])?.remove(0))
        }
    )*};
}

single_predicate! {
    is_berwald => Berwald,
    is_weakly_berwald => WeaklyBerwald,
    is_douglas => Douglas,
    is_gdw => Gdw,
    is_gbw => Gbw,
    h_vanishes => HVanishes,
    is_rquadratic => RQuadratic,
    is_scalar_curvature => ScalarCurvature,
    is_constant_curvature => ConstantCurvature,
    wtilde_vanishes => WtildeVanishes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImplicationStatus {
    Consistent,
    Violated,
    /// An indeterminate verdict leaves the implication open at this tolerance.
    Untested,
    /// Hypotheses of the statement (dimension) are not met.
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImplicationReport {
    pub name: &'static str,
    pub statement: &'static str,
    pub status: ImplicationStatus,
}

enum Lit {
    Is(PredicateId),
    Not(PredicateId),
}

struct Implication {
    name: &'static str,
    statement: &'static str,
    given: &'static [Lit],
    then: Lit,
    min_dim: usize,
}

const IMPLICATIONS: &[Implication] = &[
    Implication {
        name: "gbw_implies_gdw",
        statement: "GBW => GDW",
        given: &[Lit::Is(PredicateId::Gbw)],
        then: Lit::Is(PredicateId::Gdw),
        min_dim: 2,
    },
    Implication {
        name: "gbw_implies_h_zero",
        statement: "GBW => H = 0",
        given: &[Lit::Is(PredicateId::Gbw)],
        then: Lit::Is(PredicateId::HVanishes),
        min_dim: 2,
    },
    Implication {
        name: "gdw_and_h_zero_implies_gbw",
        statement: "GDW and H = 0 => GBW",
        given: &[Lit::Is(PredicateId::Gdw), Lit::Is(PredicateId::HVanishes)],
        then: Lit::Is(PredicateId::Gbw),
        min_dim: 2,
    },
    Implication {
        name: "r_quadratic_implies_gbw",
        statement: "R-quadratic => GBW",
        given: &[Lit::Is(PredicateId::RQuadratic)],
        then: Lit::Is(PredicateId::Gbw),
        min_dim: 2,
    },
    Implication {
        name: "nonconstant_scalar_excludes_gbw",
        statement: "scalar and not constant curvature, n > 2 => not GBW",
        given: &[
            Lit::Is(PredicateId::ScalarCurvature),
            Lit::Not(PredicateId::ConstantCurvature),
        ],
        then: Lit::Not(PredicateId::Gbw),
        min_dim: 3,
    },
];

/// Predicates the implication suite reads.
pub const THEOREM_PREDICATES: [PredicateId; 6] = [
    PredicateId::Gbw,
    PredicateId::Gdw,
    PredicateId::HVanishes,
    PredicateId::RQuadratic,
    PredicateId::ScalarCurvature,
    PredicateId::ConstantCurvature,
];

/// Evaluates every implication as a material conditional in three-valued
/// logic over the verdicts.
pub fn run_theorem_checks(results: &[PredicateResult], dim: usize) -> Vec<ImplicationReport> {
    let truth = |lit: &Lit| -> Option<Option<bool>> {
        let (id, negate) = match lit {
            Lit::Is(id) => (*id, false),
            Lit::Not(id) => (*id, true),
        };
        let r = results.iter().find(|r| r.id == id)?;
        Some(r.verdict.truth().map(|t| t != negate))
    };
    IMPLICATIONS
        .iter()
        .map(|imp| {
            let status = if dim < imp.min_dim {
                ImplicationStatus::Skipped
            } else {
                let given: Option<Vec<Option<bool>>> = imp.given.iter().map(truth).collect();
                match (given, truth(&imp.then)) {
                    (Some(given), Some(then)) => {
                        let antecedent = if given.contains(&Some(false)) {
                            Some(false)
                        } else if given.iter().all(|g| *g == Some(true)) {
                            Some(true)
                        } else {
                            None
                        };
                        match (antecedent, then) {
                            (Some(false), _) | (_, Some(true)) => ImplicationStatus::Consistent,
                            (Some(true), Some(false)) => ImplicationStatus::Violated,
                            _ => ImplicationStatus::Untested,
                        }
                    }
                    _ => ImplicationStatus::Skipped,
                }
            };
            ImplicationReport {
                name: imp.name,
                statement: imp.statement,
                status,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;
