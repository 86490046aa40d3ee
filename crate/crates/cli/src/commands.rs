use std::path::PathBuf;

use finsler_core::classifier::{
    evaluate, flag_curvatures, run_theorem_checks, ClassifierConfig, ImplicationReport, ImplicationStatus,
    PredicateId, PredicateResult, Verdict,
};
use finsler_core::fd_oracle::{fd_tensor_check, FdConfig, OracleReport, ORACLE_TENSORS};
use finsler_core::jets::Point;
use finsler_core::metric_library::sample_domain;
use finsler_core::projective::{fixture, verify_pair, InvarianceStatus, VerificationReport, FIXTURE_NAMES};
use finsler_core::tensor_engine::{EngineError, Geometry, MetricSource, TensorId, Variance};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{ClassifyArgs, Command, EvalArgs, OracleArgs, VerifyArgs};
use crate::config::{
    merge_list, merge_orders, merge_tol, select_metric, RunSettings, RunTable, DEFAULT_DIM,
};
use crate::error::{exit, CliError};
use crate::report::{Body, CsvRow, Report, RunEcho};

/// A rendered report and the exit code it implies.
#[derive(Debug)]
pub struct Outcome {
    pub text: String,
    pub out: Option<PathBuf>,
    pub code: i32,
    /// One-line human summary for stderr.
    pub summary: String,
}

pub fn run(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Eval(a) => eval(a),
        Command::Classify(a) => classify(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn finish<B: Body>(report: Report<B>, run: RunSettings, code: i32, summary: String) -> Result<Outcome, CliError> {
    Ok(Outcome {
        text: report.render(run.format)?,
        out: run.out,
        code,
        summary,
    })
}

fn parse_tensors(names: &[String], default: &[TensorId]) -> Result<Vec<TensorId>, CliError> {
    if names.is_empty() {
        return Ok(default.to_vec());
    }
    names
        .iter()
        .map(|n| n.trim().parse::<TensorId>().map_err(CliError::Usage))
        .collect()
}

fn symbols(ids: &[TensorId]) -> Vec<String> {
    ids.iter().map(|t| t.symbol().to_string()).collect()
}

fn index_label(mut flat: usize, dim: usize, rank: usize) -> String {
    let mut idx = vec![0; rank];
    for slot in idx.iter_mut().rev() {
        *slot = flat % dim;
        flat /= dim;
    }
    let parts: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
    format!("[{}]", parts.join(","))
}

// ---- eval ----

#[derive(Debug, Serialize)]
pub struct EvalTensor {
    pub tensor: String,
    pub variance: Vec<Variance>,
    pub y_degree: i32,
    /// Row-major components, one vector per sample.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct EvalBody {
    pub points: Vec<Point>,
    pub tensors: Vec<EvalTensor>,
}

impl Body for EvalBody {
    fn csv_rows(&self) -> Vec<CsvRow> {
        let dim = self.points.first().map_or(1, Point::dim);
        let mut rows = Vec::new();
        for t in &self.tensors {
            for (s, comps) in t.values.iter().enumerate() {
                for (k, &v) in comps.iter().enumerate() {
                    rows.push(CsvRow::new(&t.tensor, Some(s), index_label(k, dim, t.variance.len()), v));
                }
            }
        }
        rows
    }
}

pub fn eval_report(args: &EvalArgs) -> Result<(Report<EvalBody>, RunSettings), CliError> {
    let sel = select_metric(&args.metric)?;
    let run = RunSettings::merge(&args.run, &sel.run)?;
    let dim = sel.def.dim;
    let orders = merge_orders(args.orders.as_deref(), &sel.run, dim)?;
    let ids = parse_tensors(&merge_list(&args.tensors, &sel.run.tensors), &TensorId::ALL)?;
    for id in &ids {
        let (kx, ky) = id.required_orders();
        if !orders.covers(kx, ky) {
            return Err(CliError::Usage(format!("tensor {id} needs orders of at least {kx},{ky}")));
        }
    }
    let plan = sample_domain(&sel.def, run.samples, run.seed)?;
    let source = MetricSource::new(&sel.def);
    let per_sample: Vec<Vec<_>> = plan
        .par_iter()
        .map(|p| {
            let geo = Geometry::new(&source, p.clone(), orders)?;
            ids.iter().map(|&id| geo.tensor(id)).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, EngineError>>()?;
    let tensors = ids
        .iter()
        .enumerate()
        .map(|(slot, id)| EvalTensor {
            tensor: id.symbol().to_string(),
            variance: per_sample[0][slot].variance.clone(),
            y_degree: id.y_degree(),
            values: per_sample.iter().map(|s| s[slot].components.clone()).collect(),
        })
        .collect();
    let echo = RunEcho {
        metric: Some(sel.echo),
        dim,
        samples: run.samples,
        seed: run.seed,
        tol: None,
        orders: Some(orders),
        tensors: symbols(&ids),
        pairs: vec![],
        fd: None,
    };
    let body = EvalBody {
        points: plan.points,
        tensors,
    };
    Ok((Report::new("eval", echo, body), run))
}

fn eval(args: &EvalArgs) -> Result<Outcome, CliError> {
    let (report, run) = eval_report(args)?;
    let summary = format!(
        "eval {}: {} tensor(s) at {} sample(s)",
        report.run.metric.as_ref().map_or("", |m| m.name.as_str()),
        report.body.tensors.len(),
        report.run.samples
    );
    finish(report, run, exit::OK, summary)
}

// ---- classify ----

#[derive(Debug, Serialize)]
pub struct PredicateEntry {
    #[serde(flatten)]
    pub result: PredicateResult,
    pub expected: Option<Verdict>,
    pub matches_expected: Option<bool>,
    /// Sample with the largest residual.
    pub worst_point: Point,
}

#[derive(Debug, Default, Serialize)]
pub struct ClassifySummary {
    pub theorem_violations: usize,
    pub untested_implications: usize,
    pub expectation_mismatches: usize,
    pub indeterminate: usize,
}

#[derive(Debug, Serialize)]
pub struct ClassifyBody {
    pub points: Vec<Point>,
    pub predicates: Vec<PredicateEntry>,
    pub theorems: Vec<ImplicationReport>,
    /// `K = R^m_m / ((n-1) F^2)` per sample.
    pub flag_curvature: Vec<f64>,
    pub summary: ClassifySummary,
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Fails => "fails",
        Verdict::Indeterminate => "indeterminate",
    }
}

fn implication_name(s: ImplicationStatus) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

impl Body for ClassifyBody {
    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for p in &self.predicates {
            let r = &p.result;
            let status = verdict_name(r.verdict);
            rows.push(CsvRow::new(r.name, None, "residual", r.residual).with_status(status));
            rows.push(CsvRow::new(r.name, None, "scale", r.scale));
            for (s, &v) in r.per_sample.iter().enumerate() {
                rows.push(CsvRow::new(r.name, Some(s), "residual", v));
            }
        }
        for (s, &k) in self.flag_curvature.iter().enumerate() {
            rows.push(CsvRow::new("flag_curvature", Some(s), "K", k));
        }
        for t in &self.theorems {
            rows.push(CsvRow::new(t.name, None, "implication", f64::NAN).with_status(implication_name(t.status)));
        }
        rows
    }
}

pub fn classify_report(args: &ClassifyArgs) -> Result<(Report<ClassifyBody>, RunSettings), CliError> {
    let sel = select_metric(&args.metric)?;
    let run = RunSettings::merge(&args.run, &sel.run)?;
    let dim = sel.def.dim;
    let cfg = ClassifierConfig {
        tol: merge_tol(args.tol, &sel.run)?,
        orders: merge_orders(args.orders.as_deref(), &sel.run, dim)?,
    };
    let plan = sample_domain(&sel.def, run.samples, run.seed)?;
    let source = MetricSource::new(&sel.def);
    let results = evaluate(&source, &plan, &cfg, &PredicateId::ALL)?;
    let theorems = run_theorem_checks(&results, dim);
    let flag_curvature = flag_curvatures(&source, &plan, &cfg)?;

    let mut summary = ClassifySummary::default();
    let predicates: Vec<PredicateEntry> = results
        .into_iter()
        .map(|result| {
            let expected = sel.def.expected_verdict(result.id);
            let matches_expected = expected.map(|e| e == result.verdict);
            summary.expectation_mismatches += usize::from(matches_expected == Some(false));
            summary.indeterminate += usize::from(result.verdict == Verdict::Indeterminate);
            PredicateEntry {
                worst_point: plan[result.worst_sample].clone(),
                result,
                expected,
                matches_expected,
            }
        })
        .collect();
    for t in &theorems {
        match t.status {
            ImplicationStatus::Violated => summary.theorem_violations += 1,
            ImplicationStatus::Untested => summary.untested_implications += 1,
            _ => {}
        }
    }
    let echo = RunEcho {
        metric: Some(sel.echo),
        dim,
        samples: run.samples,
        seed: run.seed,
        tol: Some(cfg.tol),
        orders: Some(cfg.orders),
        tensors: vec![],
        pairs: vec![],
        fd: None,
    };
    let body = ClassifyBody {
        points: plan.points,
        predicates,
        theorems,
        flag_curvature,
        summary,
    };
    Ok((Report::new("classify", echo, body), run))
}

fn classify(args: &ClassifyArgs) -> Result<Outcome, CliError> {
    let (report, run) = classify_report(args)?;
    let s = &report.body.summary;
    let code = if s.theorem_violations > 0 { exit::VIOLATION } else { exit::OK };
    let verdicts: Vec<String> = report
        .body
        .predicates
        .iter()
        .map(|p| format!("{}={}", p.result.name, verdict_name(p.result.verdict)))
        .collect();
    let summary = format!(
        "classify {}: {}; {} theorem violation(s), {} expectation mismatch(es)",
        report.run.metric.as_ref().map_or("", |m| m.name.as_str()),
        verdicts.join(" "),
        s.theorem_violations,
        s.expectation_mismatches
    );
    finish(report, run, code, summary)
}

// ---- verify ----

#[derive(Debug, Serialize)]
pub struct PairEntry {
    #[serde(flatten)]
    pub report: VerificationReport,
    /// Whether the fixture declares a target metric it must reproduce.
    pub has_target: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct VerifyBody {
    pub pairs: Vec<PairEntry>,
}

impl Body for VerifyBody {
    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for e in &self.pairs {
            let r = &e.report;
            let res = &r.residuals;
            let name = r.pair.as_str();
            let status = if e.failures.is_empty() { "certified" } else { "failed" };
            rows.push(CsvRow::new(name, None, "q_residual", r.q_residual).with_status(if r.c_projective {
                "c_projective"
            } else {
                "not_c_projective"
            }));
            for (q, v) in [
                ("p_homogeneity", r.p_homogeneity),
                ("douglas_difference", res.douglas_difference),
                ("ber_identity", res.ber_identity),
                ("e_shift", res.e_shift),
                ("p_identity", res.p_identity),
                ("h_difference", res.h_difference),
                ("spray_match", res.spray_match.unwrap_or(f64::NAN)),
                ("geodesic_deviation", r.geodesic_deviation.unwrap_or(f64::NAN)),
            ] {
                rows.push(CsvRow::new(name, None, q, v));
            }
            for inv in &r.invariance {
                let st = match inv.status {
                    InvarianceStatus::Holds => "holds",
                    InvarianceStatus::Broken => "broken",
                    InvarianceStatus::Skipped => "skipped",
                };
                rows.push(
                    CsvRow::new(name, None, format!("invariance:{}", inv.predicate.name()), inv.source.residual)
                        .with_status(st),
                );
            }
            rows.push(CsvRow::new(name, None, "failures", e.failures.len() as f64).with_status(status));
        }
        rows
    }
}

fn pair_failures(r: &VerificationReport, has_target: bool, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    for inv in &r.invariance {
        if inv.status == InvarianceStatus::Broken {
            out.push(format!("{} invariance broken: {}", inv.predicate.name(), inv.note));
        }
    }
    let res = &r.residuals;
    for (name, v) in [
        ("douglas difference", res.douglas_difference),
        ("berwald change identity", res.ber_identity),
        ("mean berwald shift", res.e_shift),
        ("P identity", res.p_identity),
    ] {
        if v.is_nan() || v >= tol {
            out.push(format!("{name} {v:.3e} exceeds {tol:e}"));
        }
    }
    if has_target {
        if !r.c_projective {
            out.push(format!("Q residual {:.3e} exceeds {tol:e}", r.q_residual));
        }
        if let Some(m) = res.spray_match.filter(|m| m.is_nan() || *m >= tol) {
            out.push(format!("transformed spray misses the target by {m:.3e}"));
        }
    }
    out
}

pub fn verify_report(args: &VerifyArgs) -> Result<(Report<VerifyBody>, RunSettings), CliError> {
    let table = RunTable::default();
    let run = RunSettings::merge(&args.run, &table)?;
    let dim = args.dim.unwrap_or(DEFAULT_DIM);
    let cfg = ClassifierConfig {
        tol: merge_tol(args.tol, &table)?,
        orders: merge_orders(args.orders.as_deref(), &table, dim)?,
    };
    let names: Vec<String> = if args.pairs.is_empty() {
        FIXTURE_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        args.pairs.clone()
    };
    let mut pairs = Vec::new();
    for name in &names {
        let pair = fixture(name.trim(), dim)?;
        let plan = sample_domain(&pair.sampling, run.samples, run.seed)?;
        let report = verify_pair(&pair, &plan, &cfg)?;
        let has_target = pair.target.is_some();
        pairs.push(PairEntry {
            failures: pair_failures(&report, has_target, cfg.tol),
            report,
            has_target,
        });
    }
    let echo = RunEcho {
        metric: None,
        dim,
        samples: run.samples,
        seed: run.seed,
        tol: Some(cfg.tol),
        orders: Some(cfg.orders),
        tensors: vec![],
        pairs: names,
        fd: None,
    };
    Ok((Report::new("verify", echo, VerifyBody { pairs }), run))
}

fn verify(args: &VerifyArgs) -> Result<Outcome, CliError> {
    let (report, run) = verify_report(args)?;
    let failed: Vec<&str> = report
        .body
        .pairs
        .iter()
        .filter(|p| !p.failures.is_empty())
        .map(|p| p.report.pair.as_str())
        .collect();
    let lines: Vec<String> = report
        .body
        .pairs
        .iter()
        .map(|p| {
            format!(
                "{} (Q {:.1e}, {})",
                p.report.pair,
                p.report.q_residual,
                if p.report.c_projective { "C-projective" } else { "not C-projective" }
            )
        })
        .collect();
    let code = if failed.is_empty() { exit::OK } else { exit::VIOLATION };
    let summary = format!("verify: {}; failed: [{}]", lines.join(", "), failed.join(", "));
    finish(report, run, code, summary)
}

// ---- oracle ----

#[derive(Debug, Serialize)]
pub struct OracleBody {
    pub points: Vec<Point>,
    pub checks: Vec<OracleReport>,
    pub passed: bool,
}

impl Body for OracleBody {
    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for c in &self.checks {
            let status = if c.passed { "passed" } else { "failed" };
            rows.push(CsvRow::new(&c.tensor, None, "max_deviation", c.max_deviation).with_status(status));
            rows.push(CsvRow::new(&c.tensor, None, "gate", c.gate));
            rows.push(CsvRow::new(&c.tensor, None, "max_error_estimate", c.max_error_estimate));
            for (s, &d) in c.per_sample.iter().enumerate() {
                rows.push(CsvRow::new(&c.tensor, Some(s), "deviation", d));
            }
        }
        rows
    }
}

pub fn oracle_report(args: &OracleArgs) -> Result<(Report<OracleBody>, RunSettings), CliError> {
    let sel = select_metric(&args.metric)?;
    let run = RunSettings::merge(&args.run, &sel.run)?;
    let defaults = FdConfig::default();
    let fd = FdConfig {
        h0: args.h0.or(sel.run.h0).unwrap_or(defaults.h0),
        levels: args.levels.or(sel.run.levels).unwrap_or(defaults.levels),
    };
    if !(fd.h0 > 0.0 && fd.h0 < 1.0) {
        return Err(CliError::Usage(format!("--h0 must lie in (0, 1), got {}", fd.h0)));
    }
    if !(1..=8).contains(&fd.levels) {
        return Err(CliError::Usage(format!("--levels must lie in 1..=8, got {}", fd.levels)));
    }
    let ids = parse_tensors(&merge_list(&args.tensors, &sel.run.tensors), &ORACLE_TENSORS)?;
    let plan = sample_domain(&sel.def, run.samples, run.seed)?;
    let checks = ids
        .iter()
        .map(|&id| fd_tensor_check(&sel.def, id, &plan, &fd))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = checks.iter().all(|c| c.passed);
    let echo = RunEcho {
        metric: Some(sel.echo),
        dim: sel.def.dim,
        samples: run.samples,
        seed: run.seed,
        tol: None,
        orders: None,
        tensors: symbols(&ids),
        pairs: vec![],
        fd: Some(fd),
    };
    let body = OracleBody {
        points: plan.points,
        checks,
        passed,
    };
    Ok((Report::new("oracle", echo, body), run))
}

fn oracle(args: &OracleArgs) -> Result<Outcome, CliError> {
    let (report, run) = oracle_report(args)?;
    let failed: Vec<String> = report
        .body
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} ({:.2e} > {:.0e})", c.tensor, c.max_deviation, c.gate))
        .collect();
    let code = if report.body.passed { exit::OK } else { exit::VIOLATION };
    let summary = format!(
        "oracle {}: {} tensor(s), gates exceeded: [{}]",
        report.run.metric.as_ref().map_or("", |m| m.name.as_str()),
        report.body.checks.len(),
        failed.join(", ")
    );
    finish(report, run, code, summary)
}
