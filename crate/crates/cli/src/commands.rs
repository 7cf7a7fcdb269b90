use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use lyapcert::diffusion::DefectScan;
use lyapcert::gozlan::{gozlan_certificate, optimize_with, GozlanError, GozlanPotential, check_condition, A_DEFAULT};
use lyapcert::jump::{
    delta_search, fit_jump_lyapunov, gaussian_series, jump_metric_k, series_rows, stationary_measure, ChainTable,
    JumpError, Trend,
};
use lyapcert::moments::{self, certify, CertificateConstants, MomentCertificate};
use lyapcert::oracle::{
    finite_diff_audit, gaussian_tail_integral, mc_expectation_with, random_smooth_expression, McOptions, OracleReport,
    TailOptions, Verdict,
};
use lyapcert::unbounded::WeightedOracleOptions;
use lyapcert::{DiffusionProblem, EvalError, Expr, LyapunovConstants, UnboundedProblem};

use crate::problem::{Parsed, ProblemFile};
use crate::report::{to_value, write_csv, Checks, CertificateSection, DeltaOutcome, OracleEntry, Provenance, Report, Sourced};
use crate::CliError;

const MC_STEPS: usize = 400_000;

/// Accepted or rejected, plus what to print.
pub struct Outcome {
    pub accepted: bool,
    pub json: Value,
    pub summary: String,
}

fn oracle_for(
    v: &Expr,
    delta: f64,
    x0: &[f64],
    seed: Option<u64>,
    steps: usize,
) -> Result<Option<(OracleReport, &'static str)>, CliError> {
    if x0.len() <= 2 {
        let r = gaussian_tail_integral(v, delta, x0, &TailOptions::default()).map_err(|e| CliError::Invalid(e.to_string()))?;
        return Ok(Some((r, "oracle:quadrature")));
    }
    let Some(seed) = seed else { return Ok(None) };
    let x0v = x0.to_vec();
    let f = move |x: &[f64]| -> Result<f64, EvalError> {
        let d2: f64 = x.iter().zip(&x0v).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((delta * d2).exp())
    };
    let r = mc_expectation_with(v, &f, x0.len(), &McOptions::new(seed, steps)).map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok(Some((r, "oracle:mc")))
}

/// Acceptance rule shared by all kinds: a certificate, a non-divergent
/// oracle and a bound that covers the oracle value.
fn judge(
    cert: Result<(f64, f64, Value), String>,
    oracle: Option<&OracleReport>,
    extra_reasons: &[String],
    delta: f64,
) -> DeltaOutcome {
    let mut reasons = extra_reasons.to_vec();
    let (exp_bound, ln_exp_bound, detail) = match cert {
        Ok((b, l, d)) => (Some(Sourced::new(b, "formula")), Some(Sourced::new(l, "formula")), d),
        Err(e) => {
            reasons.push(e);
            (None, None, Value::Null)
        }
    };
    match oracle {
        Some(o) if o.verdict == Verdict::Divergent => reasons.push("oracle reports divergence".into()),
        Some(o) if o.verdict == Verdict::Finite => {
            if let Some(b) = &exp_bound {
                if b.value < o.value - o.error_estimate {
                    reasons.push(format!("bound {} is below the oracle value {}", b.value, o.value));
                }
            }
        }
        _ => {}
    }
    DeltaOutcome {
        delta,
        accepted: reasons.is_empty(),
        reasons,
        exp_bound,
        ln_exp_bound,
        detail,
    }
}

fn moment_detail(c: &MomentCertificate) -> (f64, f64, Value) {
    (c.exp_bound, c.ln_exp_bound, to_value(c))
}

fn scan_checks(check: &str, scan: &DefectScan) -> Checks {
    Checks {
        check: check.into(),
        passed: scan.passed,
        points: scan.points,
        items: scan.violations.iter().map(to_value).collect(),
    }
}

fn deltas_or(problem: &ProblemFile, cli: &Option<Vec<f64>>) -> Vec<f64> {
    match cli {
        Some(d) => d.clone(),
        None => problem.deltas(),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: ProblemFile,
    constants: BTreeMap<String, Sourced>,
    deltas: Vec<DeltaOutcome>,
    mut reasons: Vec<String>,
    extra: BTreeMap<String, Value>,
    oracle: Vec<OracleEntry>,
    violations: Checks,
    seed: Option<u64>,
) -> Report {
    if deltas.iter().any(|d| !d.accepted) {
        reasons.push("some δ rejected".into());
    }
    let grid = problem.grid.as_ref().map(to_value);
    Report {
        provenance: Provenance::new("certify", seed, grid),
        certificate: CertificateSection {
            accepted: reasons.is_empty(),
            reasons,
            deltas,
            extra,
        },
        problem,
        constants,
        oracle,
        violations,
    }
}

pub fn certify_problem(problem: ProblemFile, cli_deltas: &Option<Vec<f64>>, cli_seed: Option<u64>) -> Result<Report, CliError> {
    let parsed = problem.parse()?;
    let deltas = deltas_or(&problem, cli_deltas);
    let seed = cli_seed.or(problem.seed);
    let n_max = problem.n_max();
    let steps = problem.mc_steps.unwrap_or(MC_STEPS);
    let mut constants = BTreeMap::new();
    let mut outcomes = Vec::new();
    let mut oracle = Vec::new();
    let mut reasons = Vec::new();
    let mut extra = BTreeMap::new();

    let need_deltas = !matches!(parsed, Parsed::Jump { .. });
    if need_deltas && problem.m > 2 && seed.is_none() && !deltas.is_empty() {
        return Err(CliError::Usage("the Monte Carlo oracle for m > 2 needs a seed (--seed or `seed`)".into()));
    }
    if need_deltas && cli_deltas.is_none() && deltas.is_empty() {
        return Err(CliError::MissingField {
            kind: problem.kind,
            field: "delta (or --delta)".into(),
        });
    }

    let violations = match parsed {
        Parsed::Diffusion { v, w, u, x0, grid } => {
            let p = DiffusionProblem::new(v.clone(), x0.clone()).map_err(|e| CliError::Invalid(e.to_string()))?;
            let (f, is_u) = match (&w, &u) {
                (Some(w), _) => (w, false),
                (None, Some(u)) => (u, true),
                (None, None) => unreachable!("validated in parse"),
            };
            let d = p.prepare(f).map_err(|e| CliError::Invalid(e.to_string()))?;
            let k = match (problem.c, problem.b) {
                (Some(c), Some(b)) => {
                    let k = LyapunovConstants::new(c, b).map_err(|e| CliError::Infeasible(e.to_string()))?;
                    constants.insert("c".into(), Sourced::new(c, "override"));
                    constants.insert("b".into(), Sourced::new(b, "override"));
                    Some(k)
                }
                _ => {
                    let fit = if is_u { p.fit_constants_u(&d, &grid) } else { p.fit_constants(&d, &grid) };
                    match fit {
                        Ok(fit) => {
                            constants.insert("c".into(), Sourced::new(fit.constants.c, "fit"));
                            constants.insert("b".into(), Sourced::new(fit.constants.b, "fit"));
                            if fit.capped {
                                extra.insert("fit_note".into(), json!("c reached the top of the search range"));
                            }
                            Some(fit.constants)
                        }
                        Err(e) => {
                            reasons.push(format!("fit failed: {e}"));
                            None
                        }
                    }
                }
            };
            let checks = match k {
                Some(k) => {
                    let scan = if is_u { p.scan_u_form(&d, k, &grid) } else { p.scan_defect(&d, k, &grid) }
                        .map_err(|e| CliError::Invalid(e.to_string()))?;
                    if !scan.passed {
                        reasons.push(format!("{} grid points violate the condition", scan.violations.len()));
                    }
                    extra.insert("max_defect".into(), json!(scan.max_defect));
                    scan_checks(if is_u { "u_form" } else { "lyapunov_defect" }, &scan)
                }
                None => Checks {
                    check: "lyapunov_defect".into(),
                    ..Checks::default()
                },
            };
            for &delta in &deltas {
                let o = oracle_for(&v, delta, &x0, seed, steps)?;
                let cert = match k {
                    Some(k) => certify(k.c, k.b, delta, n_max).map(|c| moment_detail(&c)).map_err(|e| e.to_string()),
                    None => Err("no constants".into()),
                };
                outcomes.push(judge(cert, o.as_ref().map(|x| &x.0), &[], delta));
                if let Some((r, src)) = o {
                    oracle.push(OracleEntry { delta, source: src.into(), report: to_value(&r) });
                }
            }
            checks
        }
        Parsed::Unbounded { a, v, w, x0, grid } => {
            let p = UnboundedProblem::new(a, v, x0).map_err(|e| CliError::Invalid(e.to_string()))?;
            let d = p.prepare(&w).map_err(|e| CliError::Invalid(e.to_string()))?;
            let k = match (problem.c, problem.b) {
                (Some(c), Some(b)) => {
                    constants.insert("c".into(), Sourced::new(c, "override"));
                    constants.insert("b".into(), Sourced::new(b, "override"));
                    Some(LyapunovConstants::new(c, b).map_err(|e| CliError::Infeasible(e.to_string()))?)
                }
                _ => match p.fit_constants(&d, &grid) {
                    Ok(fit) => {
                        constants.insert("c".into(), Sourced::new(fit.constants.c, "fit"));
                        constants.insert("b".into(), Sourced::new(fit.constants.b, "fit"));
                        Some(fit.constants)
                    }
                    Err(e) => {
                        reasons.push(format!("fit failed: {e}"));
                        None
                    }
                },
            };
            let mut checks = Checks {
                check: "unbounded_lyapunov".into(),
                ..Checks::default()
            };
            if let Some(k) = k {
                let r = p.verify_unbounded_lyapunov(&d, k, &grid).map_err(|e| CliError::Invalid(e.to_string()))?;
                if !r.passed {
                    reasons.push(format!("{} grid points violate the condition", r.violations.len()));
                }
                checks.passed = r.passed;
                checks.points = r.samples.len();
                checks.items = r.violations.iter().map(to_value).collect();
            }
            let opts = WeightedOracleOptions {
                mc: McOptions::new(seed.unwrap_or(0), steps),
                ..WeightedOracleOptions::default()
            };
            for &delta in &deltas {
                let res = match k {
                    Some(k) => p.weighted_certificate(k, delta, n_max, &opts).map_err(|e| e.to_string()),
                    None => Err("no constants".into()),
                };
                let (cert, o) = match res {
                    Ok(wc) => {
                        constants.insert("mu_lambda_max".into(), Sourced::new(wc.mu_lambda.value, "oracle:quadrature"));
                        let detail = to_value(&wc);
                        (Ok((wc.total_bound, wc.ln_total_bound, detail)), wc.oracle)
                    }
                    Err(e) => (Err(e), None),
                };
                outcomes.push(judge(cert, o.as_ref(), &[], delta));
                if let Some(r) = o {
                    oracle.push(OracleEntry {
                        delta,
                        source: "oracle:quadrature".into(),
                        report: to_value(&r),
                    });
                }
            }
            checks
        }
        Parsed::Jump { chain, w, i_max, range } => {
            let table = chain.tabulate(i_max).map_err(|e| CliError::Invalid(e.to_string()))?;
            jump_certify(&problem, &table, w.as_ref(), range, &deltas, &mut constants, &mut outcomes, &mut oracle, &mut reasons, &mut extra)?
        }
        Parsed::Gozlan { v, settings, x0 } => {
            let pot = GozlanPotential::new(&v, problem.m).with_a(settings.a);
            let cond = check_condition(&pot, &settings.shells, settings.directions, settings.eps)
                .map_err(|e| CliError::Invalid(e.to_string()))?;
            let checks = Checks {
                check: "gozlan_condition".into(),
                passed: cond.verdict == lyapcert::gozlan::ConditionVerdict::Pass,
                points: cond.shells.len(),
                items: cond.shells.iter().map(to_value).collect(),
            };
            constants.insert("liminf".into(), Sourced::new(cond.liminf, "scan"));
            for &delta in &deltas {
                let o = oracle_for(&v, delta, &x0, seed, steps)?;
                let cert = match gozlan_certificate(&v, problem.m, delta, &settings) {
                    Ok(g) => {
                        constants.insert("lambda1".into(), Sourced::new(g.constants.lambda1, "formula"));
                        constants.insert("lambda2".into(), Sourced::new(g.constants.lambda2, "formula"));
                        constants.insert("lambda1p".into(), Sourced::new(g.constants.lambda1p, "formula"));
                        constants.insert("lambda2p".into(), Sourced::new(g.constants.lambda2p, "formula"));
                        constants.insert("delta_bound".into(), Sourced::new(g.constants.delta_bound, "formula"));
                        constants.insert("R".into(), Sourced::new(g.parameters.r, "scan"));
                        Ok((g.certificate.exp_bound, g.certificate.ln_exp_bound, to_value(&g)))
                    }
                    Err(e @ GozlanError::Invalid(_)) => return Err(CliError::Infeasible(e.to_string())),
                    Err(e @ GozlanError::SumConstraint { .. }) => return Err(CliError::Infeasible(e.to_string())),
                    Err(e @ GozlanError::AOutOfRange { .. }) => return Err(CliError::Infeasible(e.to_string())),
                    Err(e) => Err(e.to_string()),
                };
                outcomes.push(judge(cert, o.as_ref().map(|x| &x.0), &[], delta));
                if let Some((r, src)) = o {
                    oracle.push(OracleEntry { delta, source: src.into(), report: to_value(&r) });
                }
            }
            checks
        }
    };
    Ok(finish(problem, constants, outcomes, reasons, extra, oracle, violations, seed))
}

#[allow(clippy::too_many_arguments)]
fn jump_certify(
    problem: &ProblemFile,
    table: &ChainTable,
    w: Option<&lyapcert::jump::JumpFunction>,
    range: (usize, usize),
    deltas: &[f64],
    constants: &mut BTreeMap<String, Sourced>,
    outcomes: &mut Vec<DeltaOutcome>,
    oracle: &mut Vec<OracleEntry>,
    reasons: &mut Vec<String>,
    extra: &mut BTreeMap<String, Value>,
) -> Result<Checks, CliError> {
    let mu = match stationary_measure(table) {
        Ok(mu) => mu,
        Err(e @ JumpError::NoStationaryMeasure(_)) => {
            reasons.push(e.to_string());
            return Ok(Checks {
                check: "jump_lyapunov".into(),
                ..Checks::default()
            });
        }
        Err(e) => return Err(CliError::Invalid(e.to_string())),
    };
    let k = jump_metric_k(table);
    constants.insert("K".into(), Sourced::new(k.k, "scan"));
    extra.insert("K".into(), to_value(&k));
    if k.verdict != Trend::Bounded {
        reasons.push(format!("K verdict {:?} (tail slope {:.3})", k.verdict, k.tail_slope));
    }
    let mut checks = Checks {
        check: "jump_lyapunov".into(),
        ..Checks::default()
    };
    let (c, passed) = match (problem.c, problem.b, w) {
        (Some(c), Some(b), _) => {
            constants.insert("c".into(), Sourced::new(c, "override"));
            constants.insert("b".into(), Sourced::new(b, "override"));
            (c, c > 0.0)
        }
        (_, _, Some(w)) => {
            let fit = fit_jump_lyapunov(table, w, range.0, range.1).map_err(|e| CliError::Invalid(e.to_string()))?;
            constants.insert("c".into(), Sourced::new(fit.c, "fit"));
            constants.insert("b".into(), Sourced::new(fit.b, "fit"));
            checks.points = range.1 - range.0 + 1;
            checks.items = vec![json!({
                "c_raw": fit.c_raw,
                "trend_exponent": fit.trend_exponent,
                "decaying": fit.decaying,
            })];
            extra.insert("ratio_profile".into(), to_value(&fit.profile));
            if !fit.passed {
                reasons.push(format!(
                    "Lyapunov fit failed: ratio ~ (log i)^{:.3}, infimum {:.3e}",
                    fit.trend_exponent, fit.c_raw
                ));
            }
            (fit.c, fit.passed)
        }
        _ => unreachable!("validated in parse"),
    };
    checks.passed = passed;
    let adm = if passed && k.verdict == Trend::Bounded {
        match delta_search(c, k.k) {
            Ok(a) => {
                constants.insert("delta_star".into(), Sourced::new(a.delta_star, "search"));
                extra.insert("admissibility".into(), to_value(&a));
                Some(a)
            }
            Err(e) => {
                reasons.push(e.to_string());
                None
            }
        }
    } else {
        None
    };
    for &delta in deltas {
        let s = gaussian_series(table, &mu, delta).map_err(|e| CliError::Invalid(e.to_string()))?;
        let cert = match &adm {
            Some(a) if delta < a.delta_star => Ok((s.summary.report.value, s.summary.ln_sum, to_value(a))),
            Some(a) => Err(format!("δ = {delta} not below δ* = {}", a.delta_star)),
            None => Err("no admissible δ".into()),
        };
        let mut o = judge(cert, Some(&s.summary.report), &[], delta);
        for b in [o.exp_bound.as_mut(), o.ln_exp_bound.as_mut()].into_iter().flatten() {
            b.source = "oracle:series".into();
        }
        outcomes.push(o);
        oracle.push(OracleEntry {
            delta,
            source: "oracle:series".into(),
            report: to_value(&s.summary),
        });
    }
    Ok(checks)
}

/// Re-runs the pointwise checks of a stored report and compares the bits.
pub fn revalidate(report: &Value) -> Result<(bool, String), CliError> {
    let problem = report
        .get("problem")
        .cloned()
        .ok_or_else(|| CliError::Schema("report has no `problem`".into()))
        .and_then(ProblemFile::from_value)?;
    let stored: Checks = report
        .get("violations")
        .cloned()
        .map(serde_json::from_value)
        .transpose()
        .map_err(|e| CliError::Schema(format!("violations: {e}")))?
        .ok_or_else(|| CliError::Schema("report has no `violations`".into()))?;
    let constant = |name: &str| -> Option<f64> { report.get("constants")?.get(name)?.get("value")?.as_f64() };
    let mut p = problem.clone();
    if let (Some(c), Some(b)) = (constant("c"), constant("b")) {
        p.c = Some(c);
        p.b = Some(b);
    }
    let fresh = match problem.kind {
        crate::problem::Kind::Jump => {
            // the fit is the check: rerun it rather than trusting stored constants
            certify_problem(problem.clone(), &Some(vec![]), problem.seed)?.violations
        }
        _ => certify_problem(p, &Some(vec![]), problem.seed)?.violations,
    };
    let same = fresh.passed == stored.passed && fresh.points == stored.points && fresh.items == stored.items;
    let msg = format!(
        "{}: stored passed={} ({} items), recomputed passed={} ({} items) -> {}",
        stored.check,
        stored.passed,
        stored.items.len(),
        fresh.passed,
        fresh.items.len(),
        if same { "reproduced" } else { "MISMATCH" }
    );
    Ok((same, msg))
}

#[derive(Serialize)]
pub struct MomentRow {
    pub n: usize,
    pub beta_bound: f64,
    pub oracle_value: Option<f64>,
}

/// Moment bounds from `(c, b)` or `(λ₁′, λ₂′)`, optionally beside the
/// oracle moments of a problem.
pub fn moments_table(
    constants: CertificateConstants,
    n: usize,
    delta: Option<f64>,
    oracle_problem: Option<&ProblemFile>,
) -> Result<(Vec<MomentRow>, Option<MomentCertificate>), CliError> {
    let bounds = match constants {
        CertificateConstants::Lyapunov { c, b } => {
            let r = moments::recursion_bounds(c, b, n).map_err(|e| CliError::Infeasible(e.to_string()))?;
            let ch = moments::chain_bounds(c, b, n).map_err(|e| CliError::Infeasible(e.to_string()))?;
            r.iter().zip(&ch).map(|(x, y)| x.min(*y)).collect::<Vec<_>>()
        }
        CertificateConstants::Gozlan { lambda1p, lambda2p } => {
            let r = moments::gozlan_recursion_bounds(lambda1p, lambda2p, n.max(2))
                .map_err(|e| CliError::Infeasible(e.to_string()))?;
            let ch = moments::gozlan_chain_bounds(lambda1p, lambda2p, n.max(2))
                .map_err(|e| CliError::Infeasible(e.to_string()))?;
            r.iter().zip(&ch).map(|(x, y)| x.min(*y)).take(n + 1).collect()
        }
    };
    let mut oracle_values = vec![None; bounds.len()];
    if let Some(pf) = oracle_problem {
        let v = pf
            .v
            .as_deref()
            .ok_or_else(|| CliError::MissingField { kind: pf.kind, field: "V".into() })
            .and_then(|t| lyapcert::parse(t, pf.m).map_err(|e| CliError::BadExpression { field: "V".into(), message: e.to_string() }))?;
        let x0 = pf.x0.clone().unwrap_or_else(|| vec![0.0; pf.m]);
        for (k, slot) in oracle_values.iter_mut().enumerate() {
            let x0c = x0.clone();
            let f = move |x: &[f64]| -> Result<f64, EvalError> {
                let d2: f64 = x.iter().zip(&x0c).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok(d2.powi(k as i32))
            };
            let r = lyapcert::oracle::expectation(&v, &f, &x0, &TailOptions::default())
                .map_err(|e| CliError::Invalid(e.to_string()))?;
            *slot = r.is_finite().then_some(r.value);
        }
    }
    let rows = bounds
        .iter()
        .zip(oracle_values)
        .enumerate()
        .map(|(n, (b, o))| MomentRow { n, beta_bound: *b, oracle_value: o })
        .collect();
    let cert = match (delta, constants) {
        (Some(d), CertificateConstants::Lyapunov { c, b }) => Some(certify(c, b, d, n).map_err(|e| CliError::Rejected(e.to_string()))?),
        (Some(d), CertificateConstants::Gozlan { lambda1p, lambda2p }) => Some(
            moments::gozlan_certify(lambda1p, lambda2p, d, n).map_err(|e| CliError::Rejected(e.to_string()))?,
        ),
        (None, _) => None,
    };
    Ok((rows, cert))
}

pub fn integrate(problem: &ProblemFile, delta: f64, seed: Option<u64>, steps: usize) -> Result<OracleReport, CliError> {
    let v = problem
        .v
        .as_deref()
        .ok_or_else(|| CliError::MissingField { kind: problem.kind, field: "V".into() })?;
    let v = lyapcert::parse(v, problem.m).map_err(|e| CliError::BadExpression { field: "V".into(), message: e.to_string() })?;
    let x0 = problem.x0.clone().unwrap_or_else(|| vec![0.0; problem.m]);
    if x0.len() != problem.m {
        return Err(CliError::Invalid("x0 length differs from m".into()));
    }
    if x0.len() > 2 && seed.is_none() {
        return Err(CliError::Usage("dimensions above 2 use Monte Carlo and need --seed".into()));
    }
    Ok(oracle_for(&v, delta, &x0, seed, steps)?.expect("seeded or low-dimensional").0)
}

pub fn series(problem: &ProblemFile, delta: f64, csv: Option<&Path>, stride: Option<usize>) -> Result<Outcome, CliError> {
    let Parsed::Jump { chain, i_max, .. } = problem.parse()? else {
        return Err(CliError::Usage(format!("series needs a jump problem, got {}", problem.kind)));
    };
    let table = chain.tabulate(i_max).map_err(|e| CliError::Invalid(e.to_string()))?;
    let mu = match stationary_measure(&table) {
        Ok(m) => m,
        Err(e @ JumpError::NoStationaryMeasure(_)) => return Err(CliError::Rejected(e.to_string())),
        Err(e) => return Err(CliError::Invalid(e.to_string())),
    };
    let s = gaussian_series(&table, &mu, delta).map_err(|e| CliError::Invalid(e.to_string()))?;
    if let Some(path) = csv {
        let rows = series_rows(&table, &mu, delta, stride.unwrap_or((i_max / 1000).max(1)));
        write_csv(path, &rows)?;
    }
    let verdict = s.verdict();
    Ok(Outcome {
        accepted: verdict == Verdict::Finite,
        summary: format!(
            "delta = {delta}: {:?}, S = {}, tail slope {:.4}",
            verdict, s.summary.report.value, s.summary.tail_slope
        ),
        json: to_value(&s),
    })
}

pub fn optimize_gozlan(m: usize, a: Option<f64>, csv: Option<&Path>) -> Result<Outcome, CliError> {
    let o = optimize_with(m, a.unwrap_or(A_DEFAULT), 0.0, 0.0).map_err(|e| CliError::Infeasible(e.to_string()))?;
    if let Some(path) = csv {
        #[derive(Serialize)]
        struct Row {
            eps1: f64,
            delta: f64,
        }
        let rows: Vec<Row> = o.trace.iter().map(|&(eps1, delta)| Row { eps1, delta }).collect();
        write_csv(path, &rows)?;
    }
    let mut summary = format!("m = {m}: delta* = {:.6} at eps1 = {:.6}", o.delta_star, o.eps1_star);
    if let Some(cf) = o.closed_form {
        summary.push_str(&format!(" (closed form {cf:.6})"));
    }
    let mut json = to_value(&o);
    if let Value::Object(map) = &mut json {
        map.remove("trace");
    }
    Ok(Outcome {
        accepted: true,
        json,
        summary,
    })
}

pub fn audit_random(seed: u64, count: usize, m: usize, depth: usize, h: f64) -> Result<Outcome, CliError> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut orders = Vec::new();
    for k in 0..count {
        let e = random_smooth_expression(&mut rng, m, depth);
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        match finite_diff_audit(&e, &x, h) {
            Ok(r) => {
                orders.extend(r.measured_orders());
                if !r.passed {
                    failures.push(json!({ "index": k, "expression": e.to_string(), "max_rel_error": r.max_rel_error }));
                }
            }
            Err(err) => failures.push(json!({ "index": k, "expression": e.to_string(), "error": err.to_string() })),
        }
    }
    let low_order = orders.iter().filter(|o| **o < 1.9).count();
    let accepted = failures.is_empty() && low_order == 0;
    Ok(Outcome {
        accepted,
        summary: format!(
            "{count} expressions, {} failures, {} measured orders (min {:.3})",
            failures.len(),
            orders.len(),
            orders.iter().cloned().fold(f64::INFINITY, f64::min)
        ),
        json: json!({
            "seed": seed,
            "count": count,
            "h": h,
            "failures": failures,
            "measured_orders": orders.len(),
            "orders_below_1_9": low_order,
        }),
    })
}
