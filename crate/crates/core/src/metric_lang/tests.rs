use proptest::prelude::*;

use super::*;
use crate::jets::{JetSpec, Point};

const FUNK: &str =
    "(sqrt(norm2(y) - (norm2(x)*norm2(y) - dot(x,y)^2)) + dot(x,y)) / (1 - norm2(x))";

fn no_params() -> Params {
    Params::new()
}

#[test]
fn parses_euclidean() {
    let e = parse("norm2(y)", DeclaredForm::FSquared, &no_params()).unwrap();
    assert_eq!(e.root, Expr::Norm2(VecOperand::Y));
}

#[test]
fn parses_funk() {
    let e = parse(FUNK, DeclaredForm::F, &no_params()).unwrap();
    assert!(matches!(e.root, Expr::Div(..)));
}

#[test]
fn missing_comma_is_located() {
    let err = parse("dot(x y)", DeclaredForm::F, &no_params()).unwrap_err();
    assert_eq!((err.line, err.col), (1, 7));
    assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));
}

#[test]
fn type_and_binding_errors() {
    let mut params = Params::new();
    params.insert("a".into(), ParamValue::Vector(vec![1.0, 0.0]));
    params.insert("s".into(), ParamValue::Scalar(2.0));
    let err = parse("a * norm2(y)", DeclaredForm::F, &params).unwrap_err();
    assert!(matches!(err.kind, ParseErrorKind::TypeMismatch(_)));
    let err = parse("dot(s, y)", DeclaredForm::F, &params).unwrap_err();
    assert!(matches!(err.kind, ParseErrorKind::TypeMismatch(_)));
    let err = parse("x + 1", DeclaredForm::F, &params).unwrap_err();
    assert!(matches!(err.kind, ParseErrorKind::TypeMismatch(_)));
    let err = parse("q * norm2(y)", DeclaredForm::F, &params).unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::Unbound("q".into()));
    let err = parse("norm2(y)\n  + (1", DeclaredForm::F, &params).unwrap_err();
    assert_eq!(err.line, 2);
}

#[test]
fn half_power_becomes_sqrt() {
    let e = parse("norm2(y)^(1/2)", DeclaredForm::F, &no_params()).unwrap();
    assert_eq!(e.root, Expr::Sqrt(Box::new(Expr::Norm2(VecOperand::Y))));
    let e = parse("norm2(y)^(2/4)", DeclaredForm::F, &no_params()).unwrap();
    assert!(matches!(e.root, Expr::Sqrt(_)));
}

#[test]
fn let_bindings() {
    let text = "let r = norm2(y);\nlet s = r * 2;\ns / 2";
    let e = parse(text, DeclaredForm::FSquared, &no_params()).unwrap();
    assert_eq!(e.locals.len(), 2);
    let v = eval_f2(&e, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
    assert_eq!(v, 25.0);
}

#[test]
fn euclidean_jet() {
    let e = parse("norm2(y)", DeclaredForm::FSquared, &no_params()).unwrap();
    let p = Point::new(vec![0.2, 0.1], vec![3.0, 4.0]);
    let j = eval_as_jet(&e, JetSpec::full(2), &p).unwrap();
    assert_eq!(j.value(), 25.0);
    assert_eq!(j.partial(&[0, 0], &[2, 0]).unwrap(), 2.0);
    assert_eq!(j.partial(&[0, 0], &[1, 1]).unwrap(), 0.0);
    assert_eq!(j.partial(&[0, 0], &[0, 2]).unwrap(), 2.0);
}

#[test]
fn funk_at_origin_and_outside() {
    let e = parse(FUNK, DeclaredForm::F, &no_params()).unwrap();
    let p = Point::new(vec![0.0, 0.0], vec![1.0, 0.0]);
    let j = eval_as_jet(&e, JetSpec::full(2), &p).unwrap();
    assert!((j.value() - 1.0).abs() < 1e-15);
    let outside = Point::new(vec![1.2, 0.0], vec![0.0, 1.0]);
    let err = eval_as_jet(&e, JetSpec::full(2), &outside).unwrap_err();
    assert!(matches!(err, EvalError::Domain { .. }), "{err}");
}

#[test]
fn homogeneity_checks() {
    let samples = vec![
        Point::new(vec![0.1, 0.2], vec![0.6, 0.8]),
        Point::new(vec![-0.5, 0.3], vec![-1.0, 0.0]),
    ];
    let eu = parse("norm2(y)", DeclaredForm::FSquared, &no_params()).unwrap();
    let r = check_homogeneity(&eu, &samples, 1e-12).unwrap();
    assert!(r.passed);
    assert!(r.max_residual < 1e-15);
    let funk = parse(FUNK, DeclaredForm::F, &no_params()).unwrap();
    assert!(check_homogeneity(&funk, &samples, 1e-12).unwrap().passed);
    let wrong = parse("norm2(y)", DeclaredForm::F, &no_params()).unwrap();
    let r = check_homogeneity(&wrong, &samples, 1e-6).unwrap();
    assert!(!r.passed);
    assert!(r.max_residual > 0.4);
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0..10.0f64).prop_map(Expr::Num),
        Just(Expr::Param("s".into())),
        Just(Expr::Norm2(VecOperand::Y)),
        Just(Expr::Dot(VecOperand::X, VecOperand::Y)),
        Just(Expr::Dot(VecOperand::Param("a".into()), VecOperand::Y)),
        Just(Expr::Norm2(VecOperand::X)),
    ]
}

fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| build::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| build::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| build::mul(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| build::div(a, b)),
            inner.clone().prop_map(build::neg),
            inner.clone().prop_map(build::sqrt),
            (inner, -3i64..4, 1i64..4)
                .prop_map(|(a, p, q)| Expr::pow(a, Rational::new(p, q).unwrap())),
        ]
    })
}

fn test_params() -> Params {
    let mut p = Params::new();
    p.insert("s".into(), ParamValue::Scalar(0.7));
    p.insert("a".into(), ParamValue::Vector(vec![0.3, -0.2]));
    p
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(root in tree()) {
        let expr = MetricExpr { locals: vec![], root, form: DeclaredForm::F, params: test_params() };
        let reparsed = parse(&expr.to_string(), DeclaredForm::F, &test_params()).unwrap();
        prop_assert_eq!(reparsed, expr);
    }

    #[test]
    fn evaluation_composes(a in tree(), b in tree()) {
        // evaluating a + b equals adding the separate evaluations
        let params = test_params();
        let mk = |root| MetricExpr { locals: vec![], root, form: DeclaredForm::FSquared, params: params.clone() };
        let p = Point::new(vec![0.2, -0.1], vec![0.9, 0.4]);
        let spec = JetSpec::new(2, 1, 2).unwrap();
        let (xs, ys) = coordinate_jets(spec, &p).unwrap();
        let ja = eval_root(&mk(a.clone()), &xs, &ys);
        let jb = eval_root(&mk(b.clone()), &xs, &ys);
        let whole = eval_root(&mk(build::add(a, b)), &xs, &ys);
        if let (Ok(ja), Ok(jb), Ok(whole)) = (ja, jb, whole) {
            let combined = &ja + &jb;
            for ((_, _, u), (_, _, v)) in whole.terms().zip(combined.terms()) {
                prop_assert!(u == v || (u - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }
}
