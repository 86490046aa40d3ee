use super::*;
use crate::jets::{JetSpec, Point};
use crate::metric_lang::{eval_f, DeclaredForm, ParamValue, Params};
use crate::metric_library::{catalog_get, sample_domain, ChartDomain, MetricDef, CATALOG_NAMES};

fn setup(name: &str, dim: usize, count: usize, seed: u64) -> (MetricDef, MetricSource, Vec<Point>) {
    let def = catalog_get(name, dim, &Params::new()).unwrap();
    let src = MetricSource::new(&def);
    let plan = sample_domain(&def, count, seed).unwrap();
    (def, src, plan.points)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn euclidean_is_flat() {
    let (_, src, pts) = setup("euclidean", 3, 3, 1);
    for p in pts {
        let geo = Geometry::new(&src, p, JetSpec::full(3)).unwrap();
        let g = geo.tensor(TensorId::Fundamental).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.get(&[i, j]), if i == j { 1.0 } else { 0.0 });
            }
        }
        for id in [TensorId::Spray, TensorId::Berwald, TensorId::Riemann, TensorId::Douglas] {
            assert_eq!(geo.tensor(id).unwrap().max_abs(), 0.0, "{id}");
        }
    }
}

#[test]
fn funk_metric_at_origin_is_euclidean() {
    let def = catalog_get("funk", 2, &Params::new()).unwrap();
    let src = MetricSource::new(&def);
    let geo = Geometry::new(&src, Point::new(vec![0.0, 0.0], vec![1.0, 0.0]), JetSpec::full(2)).unwrap();
    let g = geo.tensor(TensorId::Fundamental).unwrap();
    assert!(close(g.get(&[0, 0]), 1.0, 1e-14) && close(g.get(&[1, 1]), 1.0, 1e-14));
    assert!(g.get(&[0, 1]).abs() < 1e-14);
    let inner = Geometry::new(&src, Point::new(vec![0.3, 0.1], vec![1.0, 0.0]), JetSpec::full(2)).unwrap();
    assert!(inner.tensor(TensorId::Cartan).unwrap().max_abs() > 0.1);
}

#[test]
fn catalog_metrics_are_positive_definite() {
    for name in CATALOG_NAMES {
        let (_, src, pts) = setup(name, 3, 8, 5);
        for p in pts {
            let geo = Geometry::new(&src, p, JetSpec::new(3, 0, 2).unwrap()).unwrap();
            geo.g().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}

#[test]
fn indefinite_metric_is_rejected() {
    let params = Params::from([("a".into(), ParamValue::Vector(vec![2.0, 0.0]))]);
    let def = MetricDef::from_text(
        "bad",
        2,
        "norm2(y) - dot(a, y)^2 / 2",
        DeclaredForm::FSquared,
        params,
        ChartDomain::Everywhere,
        1.0,
    )
    .unwrap();
    let src = MetricSource::new(&def);
    let geo = Geometry::new(&src, Point::new(vec![0.0, 0.0], vec![0.0, 1.0]), JetSpec::full(2)).unwrap();
    match geo.g() {
        Err(EngineError::NotPositiveDefinite { min_eigenvalue }) => assert!(close(min_eigenvalue, -1.0, 1e-12)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn points_outside_the_chart_are_rejected() {
    let def = catalog_get("funk", 2, &Params::new()).unwrap();
    let src = MetricSource::new(&def);
    let err = Geometry::new(&src, Point::new(vec![1.5, 0.0], vec![1.0, 0.0]), JetSpec::full(2)).err();
    assert_eq!(err, Some(EngineError::OutsideDomain));
}

/// `sum_k T(.., k) y^k` for the trailing index.
fn contract_last_with_y(t: &TensorValue) -> Tensor<f64> {
    let rank = t.variance.len();
    let n = t.dim;
    let y = &t.point.y;
    Tensor::from_fn(n, t.variance[..rank - 1].to_vec(), |idx| {
        let mut full = idx.to_vec();
        full.push(0);
        (0..n)
            .map(|k| {
                full[rank - 1] = k;
                t.get(&full) * y[k]
            })
            .sum()
    })
}

#[test]
fn homogeneity_identities_hold() {
    for name in CATALOG_NAMES {
        let (def, src, pts) = setup(name, 3, 4, 2);
        for p in pts {
            let geo = Geometry::new(&src, p.clone(), JetSpec::full(3)).unwrap();
            let f2 = eval_f(&def.expr, &p.x, &p.y).unwrap().powi(2);
            let y = &p.y;

            let g = geo.tensor(TensorId::Fundamental).unwrap();
            let gyy: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| g.get(&[i, j]) * y[i] * y[j]).sum();
            assert!(close(gyy, f2, 1e-12), "{name}: g(y,y) {gyy} vs {f2}");

            for id in [TensorId::Cartan, TensorId::Berwald, TensorId::Riemann, TensorId::Landsberg, TensorId::Angular] {
                let t = geo.tensor(id).unwrap();
                let r = contract_last_with_y(&t).max_abs();
                assert!(r < 1e-9 * t.max_abs().max(1.0), "{name}: {id} y = {r:e}");
            }

            let spray = geo.tensor(TensorId::Spray).unwrap();
            let ny = contract_last_with_y(&geo.tensor(TensorId::Connection).unwrap());
            for i in 0..3 {
                assert!(close(*ny.get(&[i]), 2.0 * spray.get(&[i]), 1e-10), "{name}: N y");
            }

            let h = geo.angular().unwrap();
            let mut trace = 0.0;
            for i in 0..3 {
                trace += h.get(&[i, i]);
                for k in 0..3 {
                    let hh: f64 = (0..3).map(|m| h.get(&[i, m]) * h.get(&[m, k])).sum();
                    assert!((hh - h.get(&[i, k])).abs() < 1e-10, "{name}: h idempotent");
                }
            }
            assert!(close(trace, 2.0, 1e-12));
        }
    }
}

#[test]
fn euler_relation_in_y() {
    // y^m dT/dy^m = degree * T for g (0), G (2) and B (-1)
    let (_, src, pts) = setup("shen_avector", 3, 3, 9);
    for p in pts {
        let geo = Geometry::new(&src, p.clone(), JetSpec::full(3)).unwrap();
        for (t, degree) in [
            (geo.g().unwrap().clone(), 0.0),
            (geo.spray().unwrap().clone(), 2.0),
            (geo.berwald().unwrap().clone(), -1.0),
        ] {
            let dt = t.grad_y().unwrap().values();
            let v = t.values();
            let rank = t.rank();
            for (k, &val) in v.data().iter().enumerate() {
                let mut idx = vec![0; rank];
                super::tensor::unflatten(k, 3, &mut idx);
                idx.push(0);
                let euler: f64 = (0..3)
                    .map(|m| {
                        idx[rank] = m;
                        dt.get(&idx) * p.y[m]
                    })
                    .sum();
                assert!((euler - degree * val).abs() < 1e-10 * (1.0 + val.abs()));
            }
        }
    }
}

#[test]
fn funk_spray_is_half_f_times_y() {
    let (def, src, pts) = setup("funk", 3, 6, 4);
    for p in pts {
        let geo = Geometry::new(&src, p.clone(), JetSpec::new(3, 1, 2).unwrap()).unwrap();
        let f = eval_f(&def.expr, &p.x, &p.y).unwrap();
        let g = geo.tensor(TensorId::Spray).unwrap();
        for i in 0..3 {
            assert!((g.get(&[i]) - 0.5 * f * p.y[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn douglas_modes_agree_and_are_trace_free() {
    for name in CATALOG_NAMES {
        let (_, src, pts) = setup(name, 3, 3, 6);
        for p in pts {
            let geo = Geometry::new(&src, p, JetSpec::full(3)).unwrap();
            let d1 = geo.douglas_definition().unwrap().values();
            let d2 = geo.douglas_d2().unwrap().values();
            assert!(d1.max_abs_diff(&d2) < 1e-9, "{name}");
            for j in 0..3 {
                for k in 0..3 {
                    let tr: f64 = (0..3).map(|m| d1.get(&[m, j, m, k])).sum();
                    assert!(tr.abs() < 1e-9, "{name}: trace {tr:e}");
                }
            }
        }
    }
}

#[test]
fn mean_berwald_is_half_hessian_of_divergence() {
    let (_, src, pts) = setup("shen_avector", 3, 3, 3);
    for p in pts {
        let geo = Geometry::new(&src, p, JetSpec::full(3)).unwrap();
        let s = geo.spray_divergence().unwrap();
        let e = geo.mean_berwald().unwrap().values();
        assert!(e.max_abs() > 1e-3);
        for j in 0..3 {
            for k in 0..3 {
                let hess = s.dy(j).unwrap().dy(k).unwrap().value();
                assert!((2.0 * e.get(&[j, k]) - hess).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn ricci_identity_holds_for_non_riemannian_metrics() {
    for name in ["funk", "randers_general", "perturbed_quartic"] {
        let (_, src, pts) = setup(name, 3, 3, 12);
        for p in pts {
            let geo = Geometry::new(&src, p, JetSpec::full(3)).unwrap();
            let r = geo.ricci_identity().unwrap();
            assert!(r.scale > 1e-3, "{name}: identity is not vacuous");
            assert!(r.residual < 1e-9 * r.scale.max(1.0), "{name}: {r:?}");
        }
    }
}

#[test]
fn horizontal_derivative_of_parallel_objects_vanishes() {
    let (_, src, pts) = setup("randers_general", 3, 3, 8);
    for p in pts {
        let geo = Geometry::new(&src, p.clone(), JetSpec::full(3)).unwrap();
        let f2 = geo.f2().unwrap();
        let scalar = Tensor::from_fn(3, vec![], |_| f2.clone());
        assert!(geo.hcov_along(&scalar).unwrap().values().max_abs() < 1e-12);
        let free = geo.hcov(&scalar).unwrap().values();
        assert!(free.max_abs() < 1e-12, "F^2 is horizontally parallel");
        let spec = JetSpec::full(3);
        let y = Tensor::from_fn(3, vec![Variance::Up], |i| {
            crate::jets::Jet::lift(spec, f2.base().clone(), crate::jets::Coordinate::Y(i[0])).unwrap()
        });
        assert!(geo.hcov_along(&y).unwrap().values().max_abs() < 1e-12);
    }
}

#[test]
fn riemannian_curvature_is_quadratic() {
    let (_, src, pts) = setup("riemannian_quadratic", 3, 3, 2);
    for p in pts {
        let geo = Geometry::new(&src, p, JetSpec::full(3)).unwrap();
        assert!(geo.tensor(TensorId::Cartan).unwrap().max_abs() < 1e-12);
        assert!(geo.tensor(TensorId::Berwald).unwrap().max_abs() < 1e-12);
        let r = geo.tensor(TensorId::RiemannFull).unwrap().max_abs();
        assert!(r > 0.01);
        assert!(geo.riemann_full_y().unwrap().max_abs() < 1e-10 * r.max(1.0));
    }
}

#[test]
fn bryant_has_constant_curvature_and_vanishing_wtilde() {
    let (_, src, pts) = setup("bryant", 3, 6, 21);
    for p in pts {
        let geo = Geometry::new(&src, p, JetSpec::full(3)).unwrap();
        let (kappa, iso) = geo.scalar_curvature().unwrap();
        assert!((kappa - 1.0).abs() < 1e-10, "{kappa}");
        assert!(iso.residual < 1e-10 * iso.scale.max(1.0));
        assert!(geo.wtilde().unwrap().max_abs() < 1e-10);
        assert!(geo.gbw_tensor().unwrap().max_abs() < 1e-10);
    }
}

#[test]
fn wtilde_vanishes_on_round_sphere_but_not_generic_metric() {
    // Beltrami model of the unit sphere, an independent constant-curvature case
    let def = MetricDef::from_text(
        "sphere",
        3,
        "(norm2(y) * (1 + norm2(x)) - dot(x, y)^2) / (1 + norm2(x))^2",
        DeclaredForm::FSquared,
        Params::new(),
        ChartDomain::Everywhere,
        1.0,
    )
    .unwrap();
    let src = MetricSource::new(&def);
    for p in sample_domain(&def, 4, 17).unwrap().iter() {
        let geo = Geometry::new(&src, p.clone(), JetSpec::full(3)).unwrap();
        assert!((geo.scalar_curvature().unwrap().0 - 1.0).abs() < 1e-10);
        assert!(geo.wtilde().unwrap().max_abs() < 1e-10);
    }
    let (_, src, pts) = setup("riemannian_quadratic", 3, 2, 1);
    for p in pts {
        let geo = Geometry::new(&src, p, JetSpec::full(3)).unwrap();
        assert!(geo.wtilde().unwrap().max_abs() > 1e-3);
    }
}

#[test]
fn required_orders_are_minimal() {
    let def = catalog_get("funk", 2, &Params::new()).unwrap();
    let src = MetricSource::new(&def);
    let p = Point::new(vec![0.1, -0.2], vec![0.6, 0.8]);
    for id in TensorId::ALL {
        let (kx, ky) = id.required_orders();
        let at = |kx, ky| {
            let geo = Geometry::new(&src, p.clone(), JetSpec::new(2, kx, ky).unwrap()).unwrap();
            geo.tensor(id)
        };
        at(kx, ky).unwrap_or_else(|e| panic!("{id} at ({kx},{ky}): {e}"));
        if kx > 0 {
            assert!(at(kx - 1, ky).is_err(), "{id} works below kx");
        }
        assert!(at(kx, ky - 1).is_err(), "{id} works below ky");
    }
}

#[test]
fn tensor_names_round_trip() {
    for id in TensorId::ALL {
        assert_eq!(id.symbol().parse::<TensorId>().unwrap(), id);
    }
    assert!("Q".parse::<TensorId>().is_err());
}

#[test]
fn euclidean_geodesic_is_a_straight_line() {
    let def = catalog_get("euclidean", 2, &Params::new()).unwrap();
    let src = MetricSource::new(&def);
    let path = integrate_geodesic(&src, &[0.0, 0.0], &[1.0, 0.0], 1.0, 50).unwrap();
    let last = path.last().unwrap();
    assert!((last.x[0] - 1.0).abs() < 1e-10 && last.x[1].abs() < 1e-10);
}

#[test]
fn geodesic_flow_conserves_f() {
    for name in ["funk", "randers_general", "shen_avector"] {
        let def = catalog_get(name, 2, &Params::new()).unwrap();
        let src = MetricSource::new(&def);
        let (x0, y0) = ([0.1, 0.2], [0.6, -0.8]);
        let f0 = eval_f(&def.expr, &x0, &y0).unwrap();
        let path = integrate_geodesic(&src, &x0, &y0, 0.5, 400).unwrap();
        for s in &path {
            let f = eval_f(&def.expr, &s.x, &s.v).unwrap();
            assert!((f - f0).abs() < 1e-6, "{name}: drift {}", f - f0);
        }
    }
}

#[test]
fn funk_geodesic_from_origin_stays_in_the_ball() {
    let def = catalog_get("funk", 2, &Params::new()).unwrap();
    let src = MetricSource::new(&def);
    let path = integrate_geodesic(&src, &[0.0, 0.0], &[0.0, 1.0], 3.0, 600).unwrap();
    assert!(path.iter().all(|s| s.x.iter().map(|v| v * v).sum::<f64>() < 1.0));
    assert!(path.last().unwrap().x[1] > 0.9);
}

#[test]
fn geodesic_leaving_the_chart_reports_exit_time() {
    let mut def = catalog_get("euclidean", 2, &Params::new()).unwrap();
    def.domain = ChartDomain::Ball { radius: 1.0 };
    let src = MetricSource::new(&def);
    match integrate_geodesic(&src, &[0.0, 0.0], &[2.0, 0.0], 1.0, 100) {
        Err(GeodesicError::DomainExit { t }) => assert!((t - 0.5).abs() < 0.011, "{t}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn identity_residuals_are_at_rounding_level() {
    for name in CATALOG_NAMES {
        let (_, src, pts) = setup(name, 3, 2, 31);
        for p in pts {
            let r = Geometry::new(&src, p, JetSpec::full(3)).unwrap().identity_residuals().unwrap();
            assert!(r.max() < 1e-10, "{name}: {r:?}");
        }
    }
}
