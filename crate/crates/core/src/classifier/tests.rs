use proptest::prelude::*;

use super::*;
use crate::metric_lang::{build, DeclaredForm, Params};
use crate::metric_library::{catalog_get, sample_domain, CATALOG_NAMES};
use crate::tensor_engine::MetricSource;

fn fake(id: PredicateId, verdict: Verdict) -> PredicateResult {
    PredicateResult {
        id,
        name: id.name(),
        residual: 0.0,
        scale: 0.0,
        tol: DEFAULT_TOL,
        verdict,
        samples_used: 0,
        worst_sample: 0,
        per_sample: vec![],
    }
}

fn status(reports: &[ImplicationReport], name: &str) -> ImplicationStatus {
    reports.iter().find(|r| r.name == name).unwrap().status
}

#[test]
fn verdict_bands() {
    assert_eq!(Verdict::judge(0.5e-6, 0.0, 1e-6), Verdict::Holds);
    assert_eq!(Verdict::judge(5e-6, 0.0, 1e-6), Verdict::Indeterminate);
    assert_eq!(Verdict::judge(2e-5, 0.0, 1e-6), Verdict::Fails);
    // scale only loosens the bound above 1
    assert_eq!(Verdict::judge(5e-6, 10.0, 1e-6), Verdict::Holds);
    assert_eq!(Verdict::judge(5e-6, 0.1, 1e-6), Verdict::Indeterminate);
}

proptest! {
    #[test]
    fn verdicts_are_monotone_in_tolerance(residual in 0.0..1.0f64, scale in 0.0..100.0f64,
                                          lo in -12.0..0.0f64, step in 0.0..4.0f64) {
        let rank = |v: Verdict| match v { Verdict::Fails => 0, Verdict::Indeterminate => 1, Verdict::Holds => 2 };
        let a = Verdict::judge(residual, scale, 10f64.powf(lo));
        let b = Verdict::judge(residual, scale, 10f64.powf(lo + step));
        prop_assert!(rank(a) <= rank(b));
    }
}

#[test]
fn implications_follow_three_valued_logic() {
    use PredicateId::*;
    use Verdict::*;
    let run = |v: &[(PredicateId, Verdict)], dim| {
        let results: Vec<_> = v.iter().map(|&(id, verdict)| fake(id, verdict)).collect();
        run_theorem_checks(&results, dim)
    };
    let r = run(&[(Gbw, Holds), (Gdw, Fails), (HVanishes, Holds)], 3);
    assert_eq!(status(&r, "gbw_implies_gdw"), ImplicationStatus::Violated);
    assert_eq!(status(&r, "gbw_implies_h_zero"), ImplicationStatus::Consistent);
    assert_eq!(status(&r, "gdw_and_h_zero_implies_gbw"), ImplicationStatus::Consistent);
    assert_eq!(status(&r, "r_quadratic_implies_gbw"), ImplicationStatus::Skipped);

    let r = run(&[(Gbw, Indeterminate), (Gdw, Fails)], 3);
    assert_eq!(status(&r, "gbw_implies_gdw"), ImplicationStatus::Untested);
    let r = run(&[(Gbw, Fails), (Gdw, Indeterminate)], 3);
    assert_eq!(status(&r, "gbw_implies_gdw"), ImplicationStatus::Consistent);

    let lemma = [(ScalarCurvature, Holds), (ConstantCurvature, Fails), (Gbw, Holds)];
    assert_eq!(status(&run(&lemma, 3), "nonconstant_scalar_excludes_gbw"), ImplicationStatus::Violated);
    assert_eq!(status(&run(&lemma, 2), "nonconstant_scalar_excludes_gbw"), ImplicationStatus::Skipped);
}

fn classify_catalog(name: &str, dim: usize, samples: usize) -> Vec<PredicateResult> {
    let def = catalog_get(name, dim, &Params::new()).unwrap();
    let plan = sample_domain(&def, samples, 2024).unwrap();
    let src = MetricSource::new(&def);
    evaluate(&src, &plan, &ClassifierConfig::new(dim), &PredicateId::ALL).unwrap()
}

#[test]
fn catalog_meets_expected_verdicts_and_theorems() {
    for name in CATALOG_NAMES {
        let def = catalog_get(name, 3, &Params::new()).unwrap();
        let results = classify_catalog(name, 3, 6);
        for (id, expected) in &def.expected {
            let r = results.iter().find(|r| r.id == *id).unwrap();
            assert_eq!(r.verdict, *expected, "{name} {}: residual {:e} scale {:e}", id.name(), r.residual, r.scale);
        }
        for check in run_theorem_checks(&results, 3) {
            assert_ne!(check.status, ImplicationStatus::Violated, "{name}: {}", check.statement);
        }
    }
}

#[test]
fn verdicts_are_invariant_under_constant_rescaling() {
    for name in CATALOG_NAMES {
        let def = catalog_get(name, 3, &Params::new()).unwrap();
        let plan = sample_domain(&def, 4, 77).unwrap();
        let mut scaled = def.clone();
        let factor = match def.expr.form {
            DeclaredForm::F => 2.0,
            DeclaredForm::FSquared => 4.0,
        };
        scaled.expr.root = build::mul(build::num(factor), def.expr.root.clone());
        let cfg = ClassifierConfig::new(3);
        let a = evaluate(&MetricSource::new(&def), &plan, &cfg, &PredicateId::ALL).unwrap();
        let b = evaluate(&MetricSource::new(&scaled), &plan, &cfg, &PredicateId::ALL).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.verdict, rb.verdict, "{name} {}", ra.name);
        }
    }
}

#[test]
fn evaluation_is_deterministic() {
    let a = classify_catalog("shen_avector", 3, 4);
    let b = classify_catalog("shen_avector", 3, 4);
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra.residual.to_bits(), rb.residual.to_bits());
        assert_eq!(ra.per_sample, rb.per_sample);
    }
}

#[test]
fn two_dimensional_runs_skip_the_lemma() {
    let results = classify_catalog("shen_avector", 2, 3);
    let checks = run_theorem_checks(&results, 2);
    assert_eq!(status(&checks, "nonconstant_scalar_excludes_gbw"), ImplicationStatus::Skipped);
}

#[test]
fn shen_avector_s_curvature_is_linear_in_x() {
    let def = catalog_get("shen_avector", 3, &Params::new()).unwrap();
    let plan = sample_domain(&def, 5, 17).unwrap();
    let src = MetricSource::new(&def);
    let a = match &def.expr.params["a"] {
        crate::metric_lang::ParamValue::Vector(v) => v.clone(),
        other => panic!("{other:?}"),
    };
    let r = s_identity(&src, &plan, &a, JetSpec::new(3, 1, 3).unwrap()).unwrap();
    assert!(r.scale > 1e-2);
    assert!(r.residual < 1e-12, "{r:?}");
    // the same check on Funk (S = 2F) with a = 0 fails
    let funk = catalog_get("funk", 3, &Params::new()).unwrap();
    let plan = sample_domain(&funk, 3, 17).unwrap();
    let r = s_identity(&MetricSource::new(&funk), &plan, &[0.0; 3], JetSpec::new(3, 1, 3).unwrap()).unwrap();
    assert!(r.residual > 0.1);
}
