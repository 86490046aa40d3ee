//! Built-in metric catalog, chart domains and seeded sampling.

use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{PredicateId, Verdict};
use crate::jets::Point;
use crate::metric_lang::{
    build::*, eval_f2, parse, DeclaredForm, Expr, MetricExpr, ParamValue, ParseError, Params,
};

/// Margin required between a sample's `x` and the chart boundary.
pub const SAMPLE_MARGIN: f64 = 0.05;
/// Rejection budget of [`sample_domain`].
pub const MAX_REJECTIONS: usize = 100_000;

pub const CATALOG_NAMES: [&str; 7] = [
    "euclidean",
    "riemannian_quadratic",
    "randers_general",
    "funk",
    "bryant",
    "shen_avector",
    "perturbed_quartic",
];

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown metric `{0}` (known: {known})", known = CATALOG_NAMES.join(", "))]
    UnknownMetric(String),
    #[error("invalid parameter `{name}`: {reason}")]
    BadParam { name: String, reason: String },
    #[error("dimension {0} not supported (need 2..=4)")]
    BadDimension(usize),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("could not sample domain of `{name}`: {rejections} rejections")]
    DomainTooSmall { name: String, rejections: usize },
}

/// Open chart domain in the `x` variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartDomain {
    Everywhere,
    /// `|x| < radius`
    Ball { radius: f64 },
    /// Empty chart; useful only to exercise failure paths.
    Empty,
}

impl ChartDomain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            ChartDomain::Everywhere => true,
            ChartDomain::Ball { radius } => norm(x) < *radius,
            ChartDomain::Empty => false,
        }
    }

    pub fn intersect(self, other: Self) -> Self {
        match (self, other) {
            (ChartDomain::Empty, _) | (_, ChartDomain::Empty) => ChartDomain::Empty,
            (ChartDomain::Everywhere, d) | (d, ChartDomain::Everywhere) => d,
            (ChartDomain::Ball { radius: a }, ChartDomain::Ball { radius: b }) => {
                ChartDomain::Ball { radius: a.min(b) }
            }
        }
    }

    /// True when the closed ball of radius `margin` about `x` lies inside.
    pub fn contains_with_margin(&self, x: &[f64], margin: f64) -> bool {
        match self {
            ChartDomain::Everywhere => true,
            ChartDomain::Ball { radius } => norm(x) + margin < *radius,
            ChartDomain::Empty => false,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// A metric ready for evaluation.
#[derive(Debug, Clone)]
pub struct MetricDef {
    pub name: String,
    pub dim: usize,
    pub expr: MetricExpr,
    /// Source text the expression was parsed from.
    pub text: String,
    pub domain: ChartDomain,
    /// Samples draw `x` from the ball of this radius.
    pub sample_radius: f64,
    /// Verdicts the acceptance suite expects at the default tolerance.
    pub expected: Vec<(PredicateId, Verdict)>,
}

impl MetricDef {
    /// Builds a metric from user text (config files).
    pub fn from_text(
        name: &str,
        dim: usize,
        text: &str,
        form: DeclaredForm,
        params: Params,
        domain: ChartDomain,
        sample_radius: f64,
    ) -> Result<Self, CatalogError> {
        check_dim(dim)?;
        for (k, v) in &params {
            if let ParamValue::Vector(v) = v {
                if v.len() != dim {
                    return Err(CatalogError::BadParam {
                        name: k.clone(),
                        reason: format!("length {} but dimension is {dim}", v.len()),
                    });
                }
            }
        }
        let expr = parse(text, form, &params)?;
        Ok(Self {
            name: name.to_string(),
            dim,
            expr,
            text: text.to_string(),
            domain,
            sample_radius,
            expected: Vec::new(),
        })
    }

    /// `F^2` at a plain point, or `None` outside the chart or on evaluation failure.
    pub fn f2_at(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        if !self.domain.contains(x) {
            return None;
        }
        eval_f2(&self.expr, x, y).ok().filter(|v| v.is_finite() && *v > 0.0)
    }

    pub fn expected_verdict(&self, id: PredicateId) -> Option<Verdict> {
        self.expected.iter().find(|(p, _)| *p == id).map(|(_, v)| *v)
    }
}

fn check_dim(dim: usize) -> Result<(), CatalogError> {
    if (2..=4).contains(&dim) {
        Ok(())
    } else {
        Err(CatalogError::BadDimension(dim))
    }
}

fn vector(values: &[f64], dim: usize) -> ParamValue {
    let mut v: Vec<f64> = values.iter().copied().take(dim).collect();
    v.resize(dim, 0.0);
    ParamValue::Vector(v)
}

/// Named locals and root of an expression built in code.
type Built = (Vec<(String, Expr)>, Expr);

/// A catalog entry: source text plus the same expression built in code.
struct Entry {
    text: &'static str,
    form: DeclaredForm,
    built: fn() -> Built,
    defaults: fn(usize) -> Params,
    domain: fn(&Params) -> ChartDomain,
    sample_radius: f64,
    expected: &'static [(PredicateId, Verdict)],
}

use PredicateId as P;
use Verdict::{Fails, Holds};

fn entry(name: &str) -> Option<Entry> {
    Some(match name {
        "euclidean" => Entry {
            text: "norm2(y)",
            form: DeclaredForm::FSquared,
            built: || (vec![], norm2(Y)),
            defaults: |_| Params::new(),
            domain: |_| ChartDomain::Everywhere,
            sample_radius: 1.0,
            expected: &[
                (P::Berwald, Holds),
                (P::Douglas, Holds),
                (P::Gdw, Holds),
                (P::Gbw, Holds),
                (P::HVanishes, Holds),
                (P::RQuadratic, Holds),
                (P::ScalarCurvature, Holds),
                (P::ConstantCurvature, Holds),
                (P::WtildeVanishes, Holds),
            ],
        },
        "riemannian_quadratic" => Entry {
            text: "(1 + dot(c, x)) * norm2(y) + s * dot(x, y)^2 + dot(u, y)^2",
            form: DeclaredForm::FSquared,
            built: || {
                let conformal = mul(add(num(1.0), dot(v("c"), X)), norm2(Y));
                let radial = mul(param("s"), powi(dot(X, Y), 2));
                (vec![], add(add(conformal, radial), powi(dot(v("u"), Y), 2)))
            },
            defaults: |n| {
                Params::from([
                    ("c".into(), vector(&[0.2, -0.1, 0.15, 0.05], n)),
                    ("s".into(), ParamValue::Scalar(0.3)),
                    ("u".into(), vector(&[0.1, 0.2, -0.1, 0.05], n)),
                ])
            },
            domain: |_| ChartDomain::Everywhere,
            sample_radius: 1.0,
            expected: &[
                (P::Berwald, Holds),
                (P::HVanishes, Holds),
                (P::RQuadratic, Holds),
                (P::Gbw, Holds),
                (P::Gdw, Holds),
            ],
        },
        "randers_general" => Entry {
            text: "sqrt(norm2(y) + dot(w, y)^2) + dot(b, y) + dot(p, x) * dot(q, y)",
            form: DeclaredForm::F,
            built: || {
                let alpha = sqrt(add(norm2(Y), powi(dot(v("w"), Y), 2)));
                let twist = mul(dot(v("p"), X), dot(v("q"), Y));
                (vec![], add(add(alpha, dot(v("b"), Y)), twist))
            },
            defaults: |n| {
                Params::from([
                    ("w".into(), vector(&[0.3, 0.1, -0.2, 0.1], n)),
                    ("b".into(), vector(&[0.1, -0.05, 0.05, 0.02], n)),
                    ("p".into(), vector(&[0.2, 0.1, 0.0, 0.05], n)),
                    ("q".into(), vector(&[0.0, 0.15, 0.1, -0.05], n)),
                ])
            },
            domain: |_| ChartDomain::Everywhere,
            sample_radius: 1.0,
            expected: &[(P::Berwald, Fails), (P::Douglas, Fails), (P::Gdw, Holds)],
        },
        "funk" => Entry {
            text: "(sqrt(norm2(y) - (norm2(x) * norm2(y) - dot(x, y)^2)) + dot(x, y)) / (1 - norm2(x))",
            form: DeclaredForm::F,
            built: || {
                let inner = sub(norm2(Y), sub(mul(norm2(X), norm2(Y)), powi(dot(X, Y), 2)));
                (
                    vec![],
                    div(add(sqrt(inner), dot(X, Y)), sub(num(1.0), norm2(X))),
                )
            },
            defaults: |_| Params::new(),
            domain: |_| ChartDomain::Ball { radius: 1.0 },
            sample_radius: 0.9,
            expected: &[
                (P::Berwald, Fails),
                (P::HVanishes, Holds),
                (P::Gbw, Holds),
                (P::Gdw, Holds),
                (P::Douglas, Holds),
                (P::ScalarCurvature, Holds),
                (P::ConstantCurvature, Holds),
                (P::WtildeVanishes, Holds),
                (P::RQuadratic, Fails),
            ],
        },
        "bryant" => Entry {
            text: "let Phi = eps * norm2(y) + (norm2(x) * norm2(y) - dot(x, y)^2);\n\
                   let Psi = 1 + 2 * eps * norm2(x) + norm2(x)^2;\n\
                   (sqrt(Psi * ((sqrt(Phi^2 + (1 - eps^2) * norm2(y)^2) + Phi) / 2) \
                   + (1 - eps^2) * dot(x, y)^2) + sqrt(1 - eps^2) * dot(x, y)) / Psi",
            form: DeclaredForm::F,
            built: || {
                let phi = add(
                    mul(param("eps"), norm2(Y)),
                    sub(mul(norm2(X), norm2(Y)), powi(dot(X, Y), 2)),
                );
                let psi = add(
                    add(num(1.0), mul(mul(num(2.0), param("eps")), norm2(X))),
                    powi(norm2(X), 2),
                );
                let one_minus = || sub(num(1.0), powi(param("eps"), 2));
                let inner = sqrt(add(powi(local("Phi"), 2), mul(one_minus(), powi(norm2(Y), 2))));
                let radicand = add(
                    mul(local("Psi"), div(add(inner, local("Phi")), num(2.0))),
                    mul(one_minus(), powi(dot(X, Y), 2)),
                );
                let root = div(
                    add(sqrt(radicand), mul(sqrt(one_minus()), dot(X, Y))),
                    local("Psi"),
                );
                (vec![("Phi".into(), phi), ("Psi".into(), psi)], root)
            },
            defaults: |_| Params::from([("eps".into(), ParamValue::Scalar(0.5))]),
            domain: |_| ChartDomain::Everywhere,
            sample_radius: 1.5,
            expected: &[
                (P::ScalarCurvature, Holds),
                (P::ConstantCurvature, Holds),
                (P::WtildeVanishes, Holds),
                (P::Gbw, Holds),
                (P::Gdw, Holds),
                (P::Douglas, Holds),
                (P::HVanishes, Holds),
            ],
        },
        "shen_avector" => Entry {
            text: "let W0 = norm2(x) * dot(a, y) - 2 * dot(a, x) * dot(x, y);\n\
                   let lam = 1 - norm2(a) * norm2(x)^2;\n\
                   sqrt(W0^2 + norm2(y) * lam) / lam - W0 / lam",
            form: DeclaredForm::F,
            built: || {
                let w0 = sub(
                    mul(norm2(X), dot(v("a"), Y)),
                    mul(mul(num(2.0), dot(v("a"), X)), dot(X, Y)),
                );
                let lam = sub(num(1.0), mul(norm2(v("a")), powi(norm2(X), 2)));
                let root = sub(
                    div(sqrt(add(powi(local("W0"), 2), mul(norm2(Y), local("lam")))), local("lam")),
                    div(local("W0"), local("lam")),
                );
                (vec![("W0".into(), w0), ("lam".into(), lam)], root)
            },
            defaults: |n| Params::from([("a".into(), vector(&[0.1], n))]),
            domain: |p| match p.get("a") {
                Some(ParamValue::Vector(a)) if norm(a) > 0.0 => ChartDomain::Ball {
                    radius: norm(a).powf(-0.5),
                },
                _ => ChartDomain::Everywhere,
            },
            sample_radius: 1.0,
            expected: &[
                (P::ScalarCurvature, Holds),
                (P::ConstantCurvature, Fails),
                (P::Gbw, Fails),
                (P::Gdw, Holds),
                (P::HVanishes, Fails),
                (P::Douglas, Fails),
            ],
        },
        "perturbed_quartic" => Entry {
            text: "norm2(y) + (e0 + dot(e1, x) + s * norm2(x)) * (dot(p, y)^4 + dot(q, y)^3 * dot(r, y)) / norm2(y)",
            form: DeclaredForm::FSquared,
            built: || {
                let weight = add(add(param("e0"), dot(v("e1"), X)), mul(param("s"), norm2(X)));
                let quartic = add(
                    powi(dot(v("p"), Y), 4),
                    mul(powi(dot(v("q"), Y), 3), dot(v("r"), Y)),
                );
                (vec![], add(norm2(Y), div(mul(weight, quartic), norm2(Y))))
            },
            defaults: |n| {
                Params::from([
                    ("e0".into(), ParamValue::Scalar(0.05)),
                    ("e1".into(), vector(&[0.1, -0.08, 0.06, 0.03], n)),
                    ("s".into(), ParamValue::Scalar(0.05)),
                    ("p".into(), vector(&[0.6, 0.3, -0.2, 0.1], n)),
                    ("q".into(), vector(&[0.1, 0.5, 0.3, -0.2], n)),
                    ("r".into(), vector(&[-0.4, 0.2, 0.5, 0.1], n)),
                ])
            },
            domain: |_| ChartDomain::Everywhere,
            sample_radius: 1.0,
            expected: &[(P::Gdw, Fails), (P::Gbw, Fails), (P::Berwald, Fails)],
        },
        _ => return None,
    })
}

/// Returns the catalog metric `name` in dimension `dim`, with `overrides`
/// replacing default parameters.
pub fn catalog_get(name: &str, dim: usize, overrides: &Params) -> Result<MetricDef, CatalogError> {
    let e = entry(name).ok_or_else(|| CatalogError::UnknownMetric(name.to_string()))?;
    check_dim(dim)?;
    let mut params = (e.defaults)(dim);
    for (k, v) in overrides {
        match (params.get(k), v) {
            (Some(ParamValue::Scalar(_)), ParamValue::Scalar(_)) => {}
            (Some(ParamValue::Vector(_)), ParamValue::Vector(_)) => {}
            (Some(_), _) => {
                return Err(CatalogError::BadParam {
                    name: k.clone(),
                    reason: "scalar/vector kind differs from the catalog default".into(),
                })
            }
            (None, _) => {
                return Err(CatalogError::BadParam {
                    name: k.clone(),
                    reason: format!("`{name}` has no such parameter"),
                })
            }
        }
        params.insert(k.clone(), v.clone());
    }
    if let Some(ParamValue::Scalar(eps)) = params.get("eps") {
        if eps.abs() >= 1.0 {
            return Err(CatalogError::BadParam {
                name: "eps".into(),
                reason: format!("need |eps| < 1, got {eps}"),
            });
        }
    }
    let mut def = MetricDef::from_text(
        name,
        dim,
        e.text,
        e.form,
        params.clone(),
        (e.domain)(&params),
        e.sample_radius,
    )?;
    def.expected = e.expected.to_vec();
    Ok(def)
}

/// The catalog expression as assembled in code rather than parsed.
pub fn built_in_expr(name: &str, dim: usize) -> Result<MetricExpr, CatalogError> {
    let e = entry(name).ok_or_else(|| CatalogError::UnknownMetric(name.to_string()))?;
    let (locals, root) = (e.built)();
    Ok(MetricExpr {
        locals,
        root,
        form: e.form,
        params: (e.defaults)(dim),
    })
}

/// Seeded admissible points of the slit tangent bundle.
#[derive(Debug, Clone, Serialize)]
pub struct SamplePlan {
    pub seed: u64,
    pub points: Vec<Point>,
}

impl Deref for SamplePlan {
    type Target = [Point];
    fn deref(&self) -> &[Point] {
        &self.points
    }
}

/// Rejection-samples `count` points: `x` uniform in the sampling ball with a
/// [`SAMPLE_MARGIN`] to the chart boundary, `y` uniform on the unit sphere.
pub fn sample_domain(def: &MetricDef, count: usize, seed: u64) -> Result<SamplePlan, CatalogError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = def.dim;
    let r = def.sample_radius;
    let mut points = Vec::with_capacity(count);
    let mut rejections = 0;
    while points.len() < count {
        if rejections >= MAX_REJECTIONS {
            return Err(CatalogError::DomainTooSmall {
                name: def.name.clone(),
                rejections,
            });
        }
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..=r)).collect();
        let y = unit_vector(&mut rng, n);
        let ok = norm(&x) <= r
            && def.domain.contains_with_margin(&x, SAMPLE_MARGIN)
            && def.f2_at(&x, &y).is_some();
        if ok {
            points.push(Point::new(x, y));
        } else {
            rejections += 1;
        }
    }
    Ok(SamplePlan { seed, points })
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let len = norm(&v);
        if (0.1..=1.0).contains(&len) {
            return v.into_iter().map(|a| a / len).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::JetSpec;
    use crate::metric_lang::{check_homogeneity, eval_as_jet};

    #[test]
    fn every_entry_parses_to_its_built_form() {
        for name in CATALOG_NAMES {
            for dim in [2, 3] {
                let def = catalog_get(name, dim, &Params::new()).unwrap();
                let built = built_in_expr(name, dim).unwrap();
                assert_eq!(def.expr, built, "{name}");
                let plan = sample_domain(&def, 2, 1).unwrap();
                for p in plan.iter() {
                    let a = eval_as_jet(&def.expr, JetSpec::full(dim), p).unwrap();
                    let b = eval_as_jet(&built, JetSpec::full(dim), p).unwrap();
                    for ((_, _, u), (_, _, w)) in a.terms().zip(b.terms()) {
                        assert_eq!(u.to_bits(), w.to_bits(), "{name}");
                    }
                }
            }
        }
    }

    #[test]
    fn unknown_names_and_bad_params() {
        assert!(matches!(
            catalog_get("nope", 3, &Params::new()),
            Err(CatalogError::UnknownMetric(_))
        ));
        let over = Params::from([("eps".into(), ParamValue::Scalar(1.5))]);
        assert!(catalog_get("bryant", 3, &over).is_err());
        let over = Params::from([("zzz".into(), ParamValue::Scalar(1.0))]);
        assert!(catalog_get("funk", 3, &over).is_err());
        let over = Params::from([("a".into(), ParamValue::Vector(vec![0.1]))]);
        assert!(catalog_get("shen_avector", 3, &over).is_err());
    }

    #[test]
    fn funk_sampling_is_reproducible() {
        let def = catalog_get("funk", 3, &Params::new()).unwrap();
        let a = sample_domain(&def, 20, 7).unwrap();
        let b = sample_domain(&def, 20, 7).unwrap();
        assert_eq!(a.points, b.points);
        for p in a.iter() {
            assert!(norm(&p.x) <= 0.9);
            assert!((norm(&p.y) - 1.0).abs() < 1e-14);
        }
        let c = sample_domain(&def, 20, 8).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn empty_domain_fails_to_sample() {
        let mut def = catalog_get("euclidean", 2, &Params::new()).unwrap();
        def.domain = ChartDomain::Empty;
        assert!(matches!(
            sample_domain(&def, 1, 0),
            Err(CatalogError::DomainTooSmall { .. })
        ));
    }

    #[test]
    fn catalog_metrics_are_homogeneous() {
        for name in CATALOG_NAMES {
            let def = catalog_get(name, 3, &Params::new()).unwrap();
            let plan = sample_domain(&def, 10, 3).unwrap();
            let r = check_homogeneity(&def.expr, &plan, 1e-12).unwrap();
            assert!(r.passed, "{name}: {}", r.max_residual);
        }
    }
}
