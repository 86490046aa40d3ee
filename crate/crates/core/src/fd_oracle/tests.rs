use super::*;
use crate::metric_lang::{eval_as_jet, Params};
use crate::metric_library::{catalog_get, sample_domain, CATALOG_NAMES};

fn tf(v: f64) -> TwoFloat {
    TwoFloat::from(v)
}

#[test]
fn second_derivative_of_squared_norm() {
    let field = |_: &[TwoFloat], y: &[TwoFloat]| Ok(y[0] * y[0] + y[1] * y[1]);
    let p = Point::new(vec![0.0, 0.0], vec![1.0, 1.0]);
    let est = fd_partial(&field, &p, &[0, 0], &[2, 0], &FdConfig::default()).unwrap();
    assert!((est.value - 2.0).abs() < 1e-10, "{est:?}");
}

#[test]
fn order_eight_is_refused() {
    let field = |_: &[TwoFloat], y: &[TwoFloat]| Ok(y[0]);
    let p = Point::new(vec![0.0], vec![1.0]);
    let err = fd_partial(&field, &p, &[1], &[7], &FdConfig::default()).unwrap_err();
    assert_eq!(err, FdError::OrderRefused(8));
}

#[test]
fn polynomial_partials_are_exact_and_estimates_bound_them() {
    // f = y0^4 y1^3 + x0^2 y0, d^2/dy0^2 d/dy1 f = 36 y0^2 y1^2
    let field = |x: &[TwoFloat], y: &[TwoFloat]| Ok(y[0].powi(4) * y[1].powi(3) + x[0] * x[0] * y[0]);
    let p = Point::new(vec![0.4, -0.2], vec![0.7, -1.3]);
    let est = fd_partial(&field, &p, &[0, 0], &[2, 1], &FdConfig::default()).unwrap();
    let exact = 36.0 * 0.49 * 1.69;
    assert!((est.value - exact).abs() <= 10.0 * est.error + 1e-12, "{est:?} vs {exact}");
    let est = fd_partial(&field, &p, &[2, 0], &[1, 0], &FdConfig::default()).unwrap();
    assert!((est.value - 2.0).abs() <= 10.0 * est.error + 1e-12, "{est:?}");
}

#[test]
fn funk_partials_match_the_jet_engine() {
    let def = catalog_get("funk", 3, &Params::new()).unwrap();
    let pts = sample_domain(&def, 3, 21).unwrap();
    let orders: [(&[u8], &[u8]); 4] = [
        (&[0, 0, 0], &[1, 1, 1]),
        (&[0, 0, 0], &[2, 0, 1]),
        (&[1, 0, 0], &[0, 2, 1]),
        (&[1, 1, 0], &[1, 1, 1]),
    ];
    for p in pts.iter() {
        let jet = eval_as_jet(&def.expr, JetSpec::full(3), p).unwrap();
        for (a, b) in orders {
            let exact = jet.partial(a, b).unwrap();
            let est = fd_partial(&MetricField(&def), p, a, b, &FdConfig::default()).unwrap();
            let rel = (est.value - exact).abs() / exact.abs().max(1.0);
            assert!(rel < 1e-6, "{a:?} {b:?}: {} vs {exact}", est.value);
        }
    }
}

#[test]
fn stencils_leaving_the_chart_are_reported() {
    let def = catalog_get("funk", 2, &Params::new()).unwrap();
    let p = Point::new(vec![0.99, 0.0], vec![1.0, 0.0]);
    let cfg = FdConfig { h0: 0.1, levels: 3 };
    let err = fd_partial(&MetricField(&def), &p, &[2, 0], &[0, 0], &cfg).unwrap_err();
    assert!(matches!(err, FdError::DomainExit(_)), "{err}");
}

#[test]
fn double_double_field_sees_tiny_offsets() {
    let def = catalog_get("bryant", 3, &Params::new()).unwrap();
    let p = &sample_domain(&def, 1, 4).unwrap()[0];
    let x: Vec<TwoFloat> = p.x.iter().map(|&v| tf(v)).collect();
    let y: Vec<TwoFloat> = p.y.iter().map(|&v| tf(v)).collect();
    let mut shifted = y.clone();
    let tiny = 2f64.powi(-70);
    shifted[1] = TwoFloat::new_add(p.y[1], tiny);
    let a = MetricField(&def).eval(&x, &y).unwrap();
    let b = MetricField(&def).eval(&x, &shifted).unwrap();
    let slope = eval_as_jet(&def.expr, JetSpec::new(3, 0, 1).unwrap(), p)
        .unwrap()
        .partial(&[0, 0, 0], &[0, 1, 0])
        .unwrap();
    let seen = f64::from(b - a) / tiny;
    assert!((seen - slope).abs() < 1e-6 * slope.abs().max(1.0), "{seen} vs {slope}");
}

#[test]
fn euclidean_fundamental_tensor_is_exact_to_rounding() {
    let def = catalog_get("euclidean", 3, &Params::new()).unwrap();
    let pts = sample_domain(&def, 3, 1).unwrap();
    let r = fd_tensor_check(&def, TensorId::Fundamental, &pts, &FdConfig::default()).unwrap();
    assert!(r.max_deviation < 1e-20, "{r:?}");
    assert!(r.passed);
}

#[test]
fn funk_berwald_matches_at_five_samples() {
    let def = catalog_get("funk", 3, &Params::new()).unwrap();
    let pts = sample_domain(&def, 5, 3).unwrap();
    let r = fd_tensor_check(&def, TensorId::Berwald, &pts, &FdConfig::default()).unwrap();
    assert!(r.max_deviation < 1e-4, "{r:?}");
    assert!(r.passed, "{r:?}");
}

#[test]
fn shen_h_curvature_matches() {
    let def = catalog_get("shen_avector", 3, &Params::new()).unwrap();
    let pts = sample_domain(&def, 2, 3).unwrap();
    let r = fd_tensor_check(&def, TensorId::HCurvature, &pts, &FdConfig::default()).unwrap();
    assert!(r.max_deviation < 1e-3, "{r:?}");
}

#[test]
fn every_tensor_meets_its_gate_in_two_dimensions() {
    for name in CATALOG_NAMES {
        let def = catalog_get(name, 2, &Params::new()).unwrap();
        let pts = sample_domain(&def, 2, 8).unwrap();
        for id in ORACLE_TENSORS {
            let r = fd_tensor_check(&def, id, &pts, &FdConfig::default()).unwrap();
            assert!(r.passed, "{name} {}: {:e} (gate {:e})", r.tensor, r.max_deviation, r.gate);
        }
    }
}

#[test]
fn wtilde_matches_on_a_curved_metric() {
    let def = catalog_get("randers_general", 3, &Params::new()).unwrap();
    let pts = sample_domain(&def, 1, 6).unwrap();
    let r = fd_tensor_check(&def, TensorId::Wtilde, &pts, &FdConfig::default()).unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn unsupported_tensors_are_refused() {
    let def = catalog_get("euclidean", 2, &Params::new()).unwrap();
    let pts = sample_domain(&def, 1, 1).unwrap();
    let err = fd_tensor_check(&def, TensorId::RiemannFull, &pts, &FdConfig::default()).unwrap_err();
    assert_eq!(err, FdError::Unsupported(TensorId::RiemannFull));
}
