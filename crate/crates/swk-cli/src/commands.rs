use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use swk_core::analysis::{self, AnalysisError, BoundReport, StabilityReport, Verdict};
use swk_core::dynamics::{self, AdaptiveState, AdaptiveTrajectory, DynamicsError, SweepRow};
use swk_core::filippov::{self, FilippovError};
use swk_core::state::{detect_partition, fmt_num, phase_diameter};
use swk_core::{ClusterPartition, EventKind, ModelParams, NaturalFrequencies, PhaseState, Regime, Trajectory};

use crate::config::{param_error, Check, ConfigError, Model, Resolved};
use crate::output::Artifacts;
use crate::CliError;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn config(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config(ConfigError::at(path, message))
}

fn analysis_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::Regime { .. } | AnalysisError::Hypothesis(_) => config("checks", e.to_string()),
        e => runtime(e),
    }
}

fn verdict_word(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

#[derive(Debug, Serialize)]
struct CheckResult {
    check: Check,
    passed: bool,
    reports: Vec<BoundReport>,
}

fn print_checks(results: &[CheckResult]) {
    for c in results {
        println!("check {}: {}", c.check.name(), verdict_word(c.passed));
        for r in &c.reports {
            let hyp = if r.hypotheses_hold { "" } else { " (hypotheses violated)" };
            println!(
                "  {}: {} margin={} worst_t={}{hyp}",
                r.bound_name,
                verdict_word(r.satisfied),
                fmt_num(r.margin),
                fmt_num(r.worst_t)
            );
        }
    }
}

fn evaluate_bounds(traj: &Trajectory, r: &Resolved, checks: &[Check]) -> Result<Vec<CheckResult>, CliError> {
    let b = &r.scenario.bounds;
    let p = &r.params;
    checks
        .iter()
        .filter(|c| c.is_trajectory_bound())
        .map(|&check| {
            let reports = match check {
                Check::TwoOscillator => analysis::check_two_oscillator_bounds(traj, p, b.time_slack, b.slack),
                Check::Identical => analysis::check_identical_bounds(traj, p, b.slack, b.beta),
                Check::Nonidentical => {
                    let d_inf = b.d_inf.ok_or_else(|| config("bounds.d_inf", "required by the nonidentical check"))?;
                    analysis::check_nonidentical_bounds(traj, p, d_inf, b.slack)
                }
                Check::Regular => analysis::check_regular_bounds(traj, p, b.d_inf, b.slack),
                _ => unreachable!("filtered above"),
            }
            .map_err(analysis_error)?;
            Ok(CheckResult { check, passed: reports.iter().all(|r| r.satisfied), reports })
        })
        .collect()
}

fn warn_skipped(checks: &[Check], keep: impl Fn(Check) -> bool, command: &str) {
    for c in checks.iter().filter(|&&c| !keep(c)) {
        eprintln!("note: check {} is not evaluated by {command}", c.name());
    }
}

/// Trajectory-bound checks whose hypotheses the scenario meets.
fn applicable_bounds(r: &Resolved) -> Vec<Check> {
    let om = &r.omega.omega;
    let identical = om.iter().all(|w| *w == om[0]);
    let d0 = phase_diameter(&r.theta0);
    let confined = d0 > 0.0 && d0 < PI;
    let mut out = Vec::new();
    match r.scenario.model {
        Model::Singular => {
            if identical && confined {
                if r.params.n_osc == 2 {
                    out.push(Check::TwoOscillator);
                }
                out.push(Check::Identical);
            }
            if !identical && r.params.regime() == Regime::Subcritical && r.scenario.bounds.d_inf.is_some() {
                out.push(Check::Nonidentical);
            }
        }
        Model::Regular if identical || r.scenario.bounds.d_inf.is_some() => out.push(Check::Regular),
        _ => {}
    }
    out
}

fn integrate(r: &Resolved) -> Result<Trajectory, CliError> {
    let kind = r.scenario.model.kind().expect("phase model");
    dynamics::integrate_kind(kind, &r.theta0, &r.omega, &r.params, &r.scenario.integrator).map_err(runtime)
}

fn integrate_adaptive(r: &Resolved) -> Result<AdaptiveTrajectory, CliError> {
    let start = AdaptiveState::well_prepared(r.theta0.theta.clone(), &r.params);
    dynamics::integrate_adaptive(&start, &r.omega, &r.params, &r.scenario.integrator).map_err(runtime)
}

fn event_summary(traj: &Trajectory) -> String {
    let kinds = [
        (EventKind::Collision, "collision"),
        (EventKind::Merge, "merge"),
        (EventKind::Crossing, "crossing"),
        (EventKind::SplitRejected, "split_rejected"),
    ];
    let mut s = String::from("events:");
    for (k, name) in kinds {
        let _ = write!(s, " {name}={}", traj.events_of(k).count());
    }
    s
}

fn write_adaptive(art: &Artifacts, traj: &AdaptiveTrajectory, n: usize) -> Result<(), CliError> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("theta_{i}")));
    let rows: Vec<Vec<f64>> =
        traj.samples.iter().map(|s| std::iter::once(s.t).chain(s.theta.iter().copied()).collect()).collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    art.write_table("trajectory.csv", &h, &rows)?;

    let mut header = vec!["t".to_string()];
    for i in 1..=n {
        header.extend((1..=n).map(|j| format!("a_{i}_{j}")));
    }
    let rows: Vec<Vec<f64>> = traj
        .samples
        .iter()
        .zip(&traj.couplings)
        .map(|(s, a)| std::iter::once(s.t).chain(a.iter().flatten().copied()).collect())
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    art.write_table("couplings.csv", &h, &rows)?;
    Ok(())
}

/// Runs the scenario and writes the trajectory, the event log and one
/// report per requested trajectory bound.
pub fn simulate(r: &Resolved, out: Option<&Path>) -> Result<bool, CliError> {
    let checks = &r.scenario.checks;
    warn_skipped(checks, Check::is_trajectory_bound, "simulate");
    let art = Artifacts::new(out, r)?;
    if r.scenario.model == Model::Adaptive {
        let traj = integrate_adaptive(r)?;
        write_adaptive(&art, &traj, r.params.n_osc)?;
        art.write_json("events.json", Vec::<swk_core::EventRecord>::new())?;
        art.write_json("bounds.json", Vec::<CheckResult>::new())?;
        println!("samples: {}", traj.samples.len());
        return Ok(true);
    }
    let traj = integrate(r)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv, &art.preamble()).map_err(runtime)?;
    art.write_bytes("trajectory.csv", &csv)?;
    art.write_json("events.json", &traj.events)?;
    let results = evaluate_bounds(&traj, r, checks)?;
    art.write_json("bounds.json", &results)?;
    println!("samples: {}", traj.samples.len());
    println!("{}", event_summary(&traj));
    print_checks(&results);
    Ok(results.iter().all(|c| c.passed))
}

/// Evaluates trajectory bounds only: the requested ones, or every bound
/// whose hypotheses the scenario meets.
pub fn bounds(r: &Resolved, out: Option<&Path>) -> Result<bool, CliError> {
    let requested: Vec<Check> = r.scenario.checks.iter().copied().filter(|c| c.is_trajectory_bound()).collect();
    let checks = if requested.is_empty() { applicable_bounds(r) } else { requested };
    if checks.is_empty() {
        return Err(config("checks", "no trajectory bound applies to this scenario"));
    }
    let art = Artifacts::new(out, r)?;
    let traj = integrate(r)?;
    let results = evaluate_bounds(&traj, r, &checks)?;
    art.write_json("bounds.json", &results)?;
    print_checks(&results);
    Ok(results.iter().all(|c| c.passed))
}

#[derive(Debug, Serialize)]
struct SweepCheck {
    check: Check,
    passed: bool,
}

fn print_sweep_checks(checks: &[SweepCheck]) {
    for c in checks {
        println!("check {}: {}", c.check.name(), verdict_word(c.passed));
    }
}

fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn check_list(field: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(config(field, "empty list"));
    }
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(config(field, "entries must be positive and finite"));
    }
    Ok(())
}

#[derive(Serialize)]
struct EpsilonSummary<'a> {
    regime: Regime,
    linf_bound: f64,
    membership_residual: f64,
    membership_worst_t: f64,
    rows: &'a [SweepRow],
    checks: &'a [SweepCheck],
}

/// Regularized runs against the singular reference, one row per `ε`.
pub fn sweep_epsilon(r: &Resolved, out: Option<&Path>, eps: Option<Vec<f64>>) -> Result<bool, CliError> {
    if r.scenario.model != Model::Singular {
        return Err(config("model", "sweep-epsilon needs the singular model as reference"));
    }
    let (field, eps) = match eps {
        Some(e) => ("--eps", e),
        None => ("sweep.eps", r.scenario.sweep.eps.clone()),
    };
    check_list(field, &eps)?;
    if !decreasing(&eps) {
        return Err(config(field, "epsilon values must be strictly decreasing"));
    }
    let keep = |c: Check| matches!(c, Check::Convergence | Check::FrequencyBound | Check::EnergyBound | Check::Membership);
    warn_skipped(&r.scenario.checks, keep, "sweep-epsilon");
    let art = Artifacts::new(out, r)?;
    let rep = dynamics::epsilon_sweep(&r.theta0, &r.omega, &r.params, &eps, &r.scenario.integrator).map_err(|e| match e {
        DynamicsError::InvalidConfig(m) => config(field, m),
        e => runtime(e),
    })?;
    let rows: Vec<Vec<f64>> =
        rep.rows.iter().map(|w| vec![w.eps, w.sup_dist, w.h1_seminorm, w.linf_freq, w.energy_margin]).collect();
    art.write_table("epsilon_sweep.csv", &["eps", "sup_dist", "h1_seminorm", "linf_freq", "energy_margin"], &rows)?;

    let sup: Vec<f64> = rep.rows.iter().map(|w| w.sup_dist).collect();
    let checks: Vec<SweepCheck> = r
        .scenario
        .checks
        .iter()
        .filter(|&&c| keep(c))
        .map(|&check| {
            let passed = match check {
                Check::Convergence => decreasing(&sup),
                Check::FrequencyBound => rep.rows.iter().all(|w| w.linf_freq <= rep.linf_bound),
                Check::EnergyBound => rep.rows.iter().all(|w| w.energy_margin >= 0.0),
                _ => rep.membership_residual <= r.scenario.bounds.membership_tol,
            };
            SweepCheck { check, passed }
        })
        .collect();
    art.write_json(
        "epsilon_sweep.json",
        EpsilonSummary {
            regime: rep.regime,
            linf_bound: rep.linf_bound,
            membership_residual: rep.membership_residual,
            membership_worst_t: rep.membership_worst_t,
            rows: &rep.rows,
            checks: &checks,
        },
    )?;
    println!("eps,sup_dist,h1_seminorm,linf_freq,energy_margin");
    for row in &rows {
        println!("{}", row.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(","));
    }
    println!("linf_bound: {}", fmt_num(rep.linf_bound));
    println!("membership_residual: {}", fmt_num(rep.membership_residual));
    print_sweep_checks(&checks);
    Ok(checks.iter().all(|c| c.passed))
}

/// Adaptive-coupling runs against the regular-kernel limit, one row per `η`.
pub fn sweep_eta(r: &Resolved, out: Option<&Path>, eta: Option<Vec<f64>>) -> Result<bool, CliError> {
    if !matches!(r.scenario.model, Model::Regular | Model::Adaptive) {
        return Err(config("model", "sweep-eta needs the regular or adaptive model"));
    }
    let (field, etas) = match eta {
        Some(e) => ("--eta", e),
        None => ("sweep.eta", r.scenario.sweep.eta.clone()),
    };
    check_list(field, &etas)?;
    warn_skipped(&r.scenario.checks, |c| c == Check::Convergence, "sweep-eta");
    let art = Artifacts::new(out, r)?;
    let rows = dynamics::eta_sweep(&r.theta0, &r.omega, &r.params, &etas, &r.scenario.integrator).map_err(runtime)?;
    let table: Vec<Vec<f64>> = rows.iter().map(|w| vec![w.eta, w.sup_dist]).collect();
    art.write_table("eta_sweep.csv", &["eta", "sup_dist"], &table)?;

    let mut by_eta: Vec<(f64, f64)> = rows.iter().map(|w| (w.eta, w.sup_dist)).collect();
    by_eta.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sup: Vec<f64> = by_eta.iter().map(|x| x.1).collect();
    let checks: Vec<SweepCheck> = r
        .scenario
        .checks
        .iter()
        .filter(|&&c| c == Check::Convergence)
        .map(|&check| SweepCheck { check, passed: decreasing(&sup) })
        .collect();
    art.write_json("eta_sweep.json", serde_json::json!({ "rows": rows, "checks": checks }))?;
    println!("eta,sup_dist");
    for row in &table {
        println!("{},{}", fmt_num(row[0]), fmt_num(row[1]));
    }
    print_sweep_checks(&checks);
    Ok(checks.iter().all(|c| c.passed))
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum StabilityOutcome<'a> {
    Ok { predicted: Verdict, matches_prediction: bool, report: &'a StabilityReport },
    NoConvergence { history: &'a [f64] },
}

/// Refines `theta0` to a phase-locked state and classifies it.
pub fn stability(r: &Resolved, out: Option<&Path>) -> Result<bool, CliError> {
    if r.scenario.model != Model::Singular {
        return Err(config("model", "stability needs the singular model"));
    }
    let opts = r.scenario.stability;
    if !(opts.tol > 0.0 && opts.max_iter > 0) {
        return Err(config("stability", "tol and max_iter must be positive"));
    }
    let art = Artifacts::new(out, r)?;
    let eq = match analysis::refine_equilibrium(&r.theta0, &r.omega, &r.params, opts) {
        Ok(eq) => eq,
        Err(AnalysisError::NoConvergence { history }) => {
            art.write_json("stability.json", StabilityOutcome::NoConvergence { history: &history })?;
            let h: Vec<String> = history.iter().map(|&x| fmt_num(x)).collect();
            return Err(CliError::Runtime(format!(
                "equilibrium refinement did not converge; residual history: [{}]",
                h.join(", ")
            )));
        }
        Err(e) => return Err(runtime(e)),
    };
    let report = analysis::linear_stability(&eq, &r.omega, &r.params).map_err(runtime)?;
    let predicted = analysis::predicted_verdict(&r.params);
    let matches_prediction = report.verdict == predicted;
    art.write_json("stability.json", StabilityOutcome::Ok { predicted, matches_prediction, report: &report })?;
    let word = |v: Verdict| match v {
        Verdict::Stable => "stable",
        Verdict::Unstable => "unstable",
        Verdict::Indeterminate => "indeterminate",
    };
    println!("verdict: {}", word(report.verdict));
    println!("predicted: {}", word(predicted));
    println!("residual: {}", fmt_num(report.residual));
    println!("eigenvalues: {}", report.eigenvalues.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(","));
    Ok(matches_prediction)
}

/// Cluster description read by `check-sticking`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterInput {
    pub omegas: Vec<f64>,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub regime: Regime,
}

/// Frequencies closer than this count as equal in the subcritical test.
const SUBCRITICAL_TOL: f64 = 1e-12;

fn print_matrix(y: &[Vec<f64>]) {
    println!("witness:");
    for row in y {
        println!("  {}", row.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(","));
    }
}

/// Prints the sticking verdict of one cluster with its certificate or
/// witness; returns the verdict.
pub fn check_sticking(c: &ClusterInput) -> Result<bool, CliError> {
    if c.omegas.is_empty() {
        return Err(config("omegas", "empty cluster"));
    }
    if let Some(i) = c.omegas.iter().position(|x| !x.is_finite()) {
        return Err(config(&format!("omegas[{i}]"), "must be finite"));
    }
    if !(c.k > 0.0 && c.k.is_finite()) {
        return Err(config("K", "must be positive"));
    }
    if c.n < c.omegas.len() {
        return Err(config("N", "must be at least the cluster size"));
    }
    let n = c.omegas.len();
    let mean = c.omegas.iter().sum::<f64>() / n as f64;
    // row sums of the witness: Ωᵢ − mean = (K/N) Σⱼ yᵢⱼ
    let x: Vec<f64> = c.omegas.iter().map(|w| (w - mean) * c.n as f64 / c.k).collect();
    let verdict = match c.regime {
        Regime::Subcritical => {
            let ok = filippov::sticking_subcritical(&c.omegas, SUBCRITICAL_TOL);
            println!("verdict: {ok}");
            if ok {
                print_matrix(&vec![vec![0.0; n]; n]);
            } else {
                let hi = c.omegas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = c.omegas.iter().cloned().fold(f64::INFINITY, f64::min);
                println!("frequency spread: {}", fmt_num(hi - lo));
            }
            ok
        }
        Regime::Critical => match filippov::sticking_critical_certificate(&c.omegas, c.k, c.n) {
            Some(cert) => {
                println!("verdict: false");
                let idx: Vec<String> = cert.subset.iter().map(|i| (i + 1).to_string()).collect();
                println!(
                    "certificate: m={}, I={{{}}}, deviation={}, bound={}",
                    cert.m,
                    idx.join(","),
                    fmt_num(cert.deviation),
                    fmt_num(cert.bound)
                );
                false
            }
            None => {
                println!("verdict: true");
                match filippov::construct_skew_bounded(&x) {
                    Ok(Some(y)) => print_matrix(&y.to_dense()),
                    Ok(None) => println!("witness: not searched for clusters of this size"),
                    // the subset test and the witness search use separate tolerances
                    Err(FilippovError::Infeasible { .. }) => println!("witness: at the feasibility boundary"),
                    Err(e) => return Err(runtime(e)),
                }
                true
            }
        },
        Regime::Supercritical => {
            let ok = filippov::sticking_supercritical(&swk_core::RelativeFrequencyMatrix::from_omegas(&c.omegas));
            println!("verdict: {ok}");
            if ok {
                print_matrix(&filippov::construct_skew_balanced(&x).map_err(runtime)?.to_dense());
            }
            ok
        }
    };
    Ok(verdict)
}

/// Input of `check-membership`: a state of the singular model and a
/// candidate frequency vector.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembershipInput {
    pub params: ModelParams,
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub candidate: Vec<f64>,
    /// Clusters as lists of 0-based indices; detected from `theta` if absent.
    #[serde(default)]
    pub partition: Option<Vec<Vec<usize>>>,
    #[serde(default = "default_membership_tol")]
    pub tol: f64,
}

fn default_membership_tol() -> f64 {
    1e-9
}

/// Decides whether `candidate` lies in the Filippov set-valued field at the
/// given state.
pub fn check_membership(m: &MembershipInput) -> Result<bool, CliError> {
    let p = m.params.clone().resolved();
    p.validate().map_err(|e| CliError::Config(param_error(e)))?;
    let n = p.n_osc;
    for (field, v) in [("theta", &m.theta), ("omega", &m.omega), ("candidate", &m.candidate)] {
        if v.len() != n {
            return Err(config(field, format!("expected {n} entries (params.n_osc), got {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(config(field, "entries must be finite"));
        }
    }
    if !(m.tol >= 0.0) {
        return Err(config("tol", "must be non-negative"));
    }
    let state = PhaseState::new(0.0, m.theta.clone());
    let partition = match &m.partition {
        Some(c) => ClusterPartition::from_clusters(c.clone()),
        None => detect_partition(&state, dynamics::DEFAULT_COLLISION_TOL),
    };
    let poly = filippov::build_polytope(&state, &NaturalFrequencies::new(m.omega.clone()), &p, &partition)
        .map_err(|e| match e {
            FilippovError::Regularized(_) => config("params.epsilon", e.to_string()),
            FilippovError::BadPartition(_) => config("partition", e.to_string()),
            e => runtime(e),
        })?;
    // `+ 0.0` turns a residual of −0 into +0
    let residual = filippov::membership_residual(&poly, &m.candidate) + 0.0;
    let member = residual <= m.tol;
    println!("member: {member}");
    println!("residual: {}", fmt_num(residual));
    println!("dimension: {}", poly.dimension());
    Ok(member)
}
