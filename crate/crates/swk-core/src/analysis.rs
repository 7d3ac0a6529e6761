//! Equilibria, linear stability, and closed-form synchronization bounds
//! evaluated against trajectories.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{integrate, rhs_full, DynamicsError, IntegratorConfig};
use crate::kernel::{
    gamma, gamma_prime, h_singular, kernel_derivative, wrap, KernelError, KernelKind, ModelParams,
    Regime,
};
use crate::quad;
use crate::state::{
    freq_diameter, phase_diameter, ClusterPartition, EventKind, NaturalFrequencies, PhaseState, StateError,
    Trajectory,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("requires the {expected} regime (alpha = {alpha})")]
    Regime { expected: &'static str, alpha: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("equilibrium residual {residual:e} exceeds {tol:e}")]
    Residual { residual: f64, tol: f64 },
    #[error("equilibrium refinement did not converge; residual history {history:?}")]
    NoConvergence { history: Vec<f64> },
    #[error("empty trajectory")]
    Empty,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Indeterminate,
}

/// Numerical slack granted to an envelope: `rel·|envelope| + abs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Slack {
    fn default() -> Self {
        Slack { rel: 1e-3, abs: 1e-9 }
    }
}

impl Slack {
    pub fn new(rel: f64, abs: f64) -> Self {
        Slack { rel, abs }
    }

    pub fn tol(&self, envelope: f64) -> f64 {
        self.rel * envelope.abs() + self.abs
    }
}

/// Outcome of one bound evaluated over a trajectory. `margin` is the smallest
/// slack-adjusted gap over the samples, so `satisfied ⇔ margin ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub theorem_ref: String,
    pub satisfied: bool,
    pub margin: f64,
    pub worst_t: f64,
    /// `false` when the run violates a hypothesis of the bound; the bound is
    /// still evaluated.
    pub hypotheses_hold: bool,
}

struct Accum {
    margin: f64,
    worst_t: f64,
}

impl Accum {
    fn new() -> Self {
        Accum { margin: f64::INFINITY, worst_t: f64::NAN }
    }

    fn push(&mut self, t: f64, gap: f64) {
        if gap < self.margin || self.worst_t.is_nan() {
            self.margin = gap;
            self.worst_t = t;
        }
    }

    fn report(self, name: &str, reference: &str, hypotheses_hold: bool) -> BoundReport {
        let margin = if self.margin.is_finite() { self.margin } else { 0.0 };
        BoundReport {
            bound_name: name.to_string(),
            theorem_ref: reference.to_string(),
            satisfied: margin >= 0.0 && !margin.is_nan(),
            margin,
            worst_t: if self.worst_t.is_nan() { 0.0 } else { self.worst_t },
            hypotheses_hold,
        }
    }
}

/// Every sample with `observed ≤ envelope(t)` up to slack.
fn upper_bound<F: Fn(f64) -> f64>(samples: &[(f64, f64)], env: F, slack: Slack) -> Accum {
    let mut acc = Accum::new();
    for &(t, obs) in samples {
        let e = env(t);
        acc.push(t, e - obs + slack.tol(e));
    }
    acc
}

fn lower_bound<F: Fn(f64) -> f64>(samples: &[(f64, f64)], env: F, slack: Slack) -> Accum {
    let mut acc = Accum::new();
    for &(t, obs) in samples {
        let e = env(t);
        acc.push(t, obs - e + slack.tol(e));
    }
    acc
}

fn h(theta: f64, alpha: f64) -> f64 {
    h_singular(theta, alpha).unwrap_or(0.0)
}

fn h_prime_singular(theta: f64, p: &ModelParams) -> f64 {
    kernel_derivative(KernelKind::SingularH, theta, p)
}

/// The unique `θ̃ ∈ (0, π/2)` with `2α sin θ̃ = θ̃ cos θ̃`, where the
/// subcritical kernel attains its maximum.
pub fn theta_tilde(alpha: f64) -> Result<f64, AnalysisError> {
    if Regime::from_alpha(alpha) != Regime::Subcritical || alpha <= 0.0 {
        return Err(AnalysisError::Regime { expected: "subcritical", alpha });
    }
    let f = |x: f64| 2.0 * alpha * x.sin() - x * x.cos();
    let lo = 1e-300_f64.max(f64::EPSILON);
    Ok(quad::bisect(f, lo, std::f64::consts::FRAC_PI_2, 1e-16).expect("sign change on (0, π/2)"))
}

/// Collision-time bracket and envelopes for two identical oscillators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoOscillatorBounds {
    pub theta0: f64,
    pub alpha: f64,
    pub coupling_k: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl TwoOscillatorBounds {
    /// Lower envelope of `|θ(t)|^{2α}`: `|θ₀|^{2α} − 2Kαt`, clipped at 0.
    pub fn lower_envelope(&self, t: f64) -> f64 {
        (self.theta0.powf(2.0 * self.alpha) - 2.0 * self.coupling_k * self.alpha * t).max(0.0)
    }

    /// Upper envelope of `|θ(t)|^{2α}`: `|θ₀|^{2α} − 2Kα (sin|θ₀|/|θ₀|) t`,
    /// clipped at 0.
    pub fn upper_envelope(&self, t: f64) -> f64 {
        let r = self.theta0.sin() / self.theta0;
        (self.theta0.powf(2.0 * self.alpha) - 2.0 * self.coupling_k * self.alpha * r * t).max(0.0)
    }
}

pub fn two_oscillator_bounds(theta0: f64, p: &ModelParams) -> Result<TwoOscillatorBounds, AnalysisError> {
    let x = theta0.abs();
    if !(x > 0.0 && x < std::f64::consts::PI) {
        return Err(AnalysisError::Hypothesis(format!("|theta0| = {x} must lie in (0, π)")));
    }
    let (a, k) = (p.alpha, p.coupling_k);
    Ok(TwoOscillatorBounds {
        theta0: x,
        alpha: a,
        coupling_k: k,
        t_min: x.powf(2.0 * a) / (2.0 * k * a),
        t_max: x.powf(2.0 * a + 1.0) / (2.0 * k * a * x.sin()),
    })
}

/// Instant of the first collision: the extrapolated contact time when the
/// event log carries one.
pub fn first_collision_time(traj: &Trajectory) -> Option<f64> {
    traj.events_of(EventKind::Collision).next().map(|e| e.t_contact.unwrap_or(e.t_event))
}

/// First sample time with `D(Θ) ≤ threshold`.
pub fn sync_time(traj: &Trajectory, threshold: f64) -> Option<f64> {
    traj.samples.iter().find(|s| phase_diameter(s) <= threshold).map(|s| s.t)
}

/// Two-oscillator identical run: collision time inside `[t_min, t_max]`
/// (relative slack `time_slack`) and both envelopes of `|θ₂ − θ₁|^{2α}`.
pub fn check_two_oscillator_bounds(
    traj: &Trajectory,
    p: &ModelParams,
    time_slack: f64,
    envelope_slack: Slack,
) -> Result<Vec<BoundReport>, AnalysisError> {
    let first = traj.samples.first().ok_or(AnalysisError::Empty)?;
    if first.theta.len() != 2 {
        return Err(AnalysisError::Hypothesis("two oscillators required".into()));
    }
    let hyp = identical(&traj.omega_nat);
    let theta0 = first.theta[1] - first.theta[0];
    let b = two_oscillator_bounds(theta0, p)?;
    let reference = "two identical oscillators: finite-time phase synchronization";
    let mut out = Vec::new();

    let mut acc = Accum::new();
    match first_collision_time(traj) {
        Some(t) => {
            acc.push(t, t - b.t_min * (1.0 - time_slack));
            acc.push(t, b.t_max * (1.0 + time_slack) - t);
        }
        None => acc.push(traj.samples.last().unwrap().t, -1.0),
    }
    out.push(acc.report("collision_time_bracket", reference, hyp));

    let gaps: Vec<(f64, f64)> =
        traj.samples.iter().map(|s| (s.t, (s.theta[1] - s.theta[0]).abs().powf(2.0 * p.alpha))).collect();
    out.push(upper_bound(&gaps, |t| b.upper_envelope(t), envelope_slack).report(
        "power_upper_envelope",
        reference,
        hyp,
    ));
    out.push(lower_bound(&gaps, |t| b.lower_envelope(t), envelope_slack).report(
        "power_lower_envelope",
        reference,
        hyp,
    ));
    Ok(out)
}

/// Equilibria of the relative phase of two oscillators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoEquilibria {
    /// Signed roots of `Ω = K h(θ̄)` with their stability.
    pub roots: Vec<(f64, Verdict)>,
    /// `Ω = 0`: the synchronous state is the only rest point.
    pub synchronous: bool,
    pub diagnostic: Option<String>,
}

/// Bisection in `ln θ` to full resolution: near `α = 1/2` the roots can sit
/// hundreds of decades below 1.
fn log_bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Option<f64> {
    quad::bisect(|u| f(u.exp()), lo.ln(), hi.ln(), 0.0).map(f64::exp)
}

/// Roots of `Ω = K h(θ̄)` for the relative phase `θ = θ₂ − θ₁` (with
/// `Ω = Ω₂ − Ω₁`); roots are mirrored into `(−π, 0)` when `Ω < 0`.
pub fn equilibrium_two(omega_rel: f64, p: &ModelParams) -> Result<TwoEquilibria, AnalysisError> {
    let k = p.coupling_k;
    let a = p.alpha;
    if omega_rel == 0.0 {
        return Ok(TwoEquilibria {
            roots: Vec::new(),
            synchronous: true,
            diagnostic: Some("zero relative frequency: only the synchronous state".into()),
        });
    }
    let w = omega_rel.abs();
    let s = omega_rel.signum();
    let f = |x: f64| k * h(x, a) - w;
    let pi = std::f64::consts::PI;
    let mut roots = Vec::new();
    let mut diagnostic = None;
    match p.regime() {
        Regime::Subcritical => {
            let tt = theta_tilde(a)?;
            let peak = f(tt);
            if peak < 0.0 {
                return Ok(TwoEquilibria {
                    roots,
                    synchronous: false,
                    diagnostic: Some(format!("K h̄ = {} below |Ω| = {w}: no equilibrium", k * h(tt, a))),
                });
            }
            if peak == 0.0 {
                roots.push((s * tt, Verdict::Indeterminate));
            } else {
                let r2 = log_bisect(f, tt, pi).expect("h decreases from its peak to 0 at π");
                // for α close to 1/2 the stable root can lie below the
                // smallest positive double
                match log_bisect(f, f64::MIN_POSITIVE, tt) {
                    Some(r1) => roots.push((s * r1, Verdict::Stable)),
                    None => diagnostic = Some("stable root below floating-point range".to_string()),
                }
                roots.push((s * r2, Verdict::Unstable));
            }
        }
        regime => {
            if regime == Regime::Critical && w >= k {
                return Ok(TwoEquilibria {
                    roots,
                    synchronous: false,
                    diagnostic: Some(format!("|Ω| = {w} ≥ K = {k}: no equilibrium")),
                });
            }
            // h decreases from its limit at 0 to 0 at π; just above α = 1/2
            // the root can lie below the smallest positive double
            match log_bisect(f, f64::MIN_POSITIVE, pi) {
                Some(r) => roots.push((s * r, Verdict::Unstable)),
                None => diagnostic = Some("root below floating-point range".to_string()),
            }
        }
    }
    Ok(TwoEquilibria { roots, synchronous: false, diagnostic })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub equilibrium: PhaseState,
    /// `a_ij = h'(θ̄ⱼ − θ̄ᵢ)` off the diagonal, `a_ii = −Σ_{j≠i} a_ij`; the
    /// Jacobian of the vector field is `(K/N) A`.
    pub matrix_a: Vec<Vec<f64>>,
    /// Real parts, ascending.
    pub eigenvalues: Vec<f64>,
    pub max_imag: f64,
    pub zero_multiplicity: usize,
    pub verdict: Verdict,
    pub residual: f64,
}

const ZERO_EIG: f64 = 1e-8;
const EQ_RESIDUAL: f64 = 1e-8;

/// `H(Θ) − mean(Ω)`: vanishes exactly at phase-locked states.
fn locked_residual(theta: &[f64], omega: &NaturalFrequencies, p: &ModelParams) -> Result<Vec<f64>, AnalysisError> {
    let n = theta.len();
    let st = PhaseState::new(0.0, theta.to_vec());
    let hv = rhs_full(&st, omega, p, KernelKind::SingularH, &ClusterPartition::singletons(n))?;
    let m = omega.mean();
    Ok(hv.into_iter().map(|x| x - m).collect())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn stability_matrix(theta: &[f64], p: &ModelParams) -> DMatrix<f64> {
    let n = theta.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = h_prime_singular(theta[j] - theta[i], p);
                a[(i, j)] = v;
                diag -= v;
            }
        }
        a[(i, i)] = diag;
    }
    a
}

fn check_collision_less(theta: &[f64]) -> Result<(), AnalysisError> {
    for i in 0..theta.len() {
        for j in (i + 1)..theta.len() {
            if wrap(theta[j] - theta[i]).abs() <= crate::dynamics::DEFAULT_COLLISION_TOL {
                return Err(AnalysisError::Hypothesis(format!("oscillators {i} and {j} collide")));
            }
        }
    }
    Ok(())
}

/// Spectrum of the linearization at a collision-less phase-locked state.
pub fn linear_stability(
    equilibrium: &PhaseState,
    omega_nat: &NaturalFrequencies,
    p: &ModelParams,
) -> Result<StabilityReport, AnalysisError> {
    equilibrium.validate(omega_nat.len())?;
    check_collision_less(&equilibrium.theta)?;
    let residual = max_abs(&locked_residual(&equilibrium.theta, omega_nat, p)?);
    if residual > EQ_RESIDUAL {
        return Err(AnalysisError::Residual { residual, tol: EQ_RESIDUAL });
    }
    let a = stability_matrix(&equilibrium.theta, p);
    let asym = (&a - a.transpose()).abs().max();
    let (mut eig, max_imag): (Vec<f64>, f64) = if asym <= 1e-10 {
        let sym = (&a + a.transpose()) * 0.5;
        (sym.symmetric_eigenvalues().iter().copied().collect(), 0.0)
    } else {
        let c = a.complex_eigenvalues();
        (c.iter().map(|z| z.re).collect(), c.iter().fold(0.0f64, |m, z| m.max(z.im.abs())))
    };
    eig.sort_by(f64::total_cmp);
    let zero_multiplicity = eig.iter().filter(|l| l.abs() <= ZERO_EIG).count();
    let verdict = if eig.iter().any(|&l| l > ZERO_EIG) {
        Verdict::Unstable
    } else if zero_multiplicity == 1 && eig.iter().filter(|l| l.abs() > ZERO_EIG).all(|&l| l < 0.0) {
        Verdict::Stable
    } else {
        Verdict::Indeterminate
    };
    Ok(StabilityReport {
        equilibrium: equilibrium.clone(),
        matrix_a: (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect(),
        eigenvalues: eig,
        max_imag,
        zero_multiplicity,
        verdict,
        residual,
    })
}

/// Verdict expected for a collision-less equilibrium in the regime of `p`.
pub fn predicted_verdict(p: &ModelParams) -> Verdict {
    match p.regime() {
        Regime::Subcritical => Verdict::Stable,
        _ => Verdict::Unstable,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions { tol: 1e-12, max_iter: 200 }
    }
}

/// Damped Newton iteration on `H(Θ) − mean(Ω) = 0`, keeping the mean phase
/// of the seed (the conserved direction is pinned by adding `𝟙𝟙ᵀ/N` to the
/// Jacobian).
pub fn refine_equilibrium(
    seed: &PhaseState,
    omega_nat: &NaturalFrequencies,
    p: &ModelParams,
    opts: RefineOptions,
) -> Result<PhaseState, AnalysisError> {
    seed.validate(omega_nat.len())?;
    let n = seed.theta.len();
    let mean0 = seed.theta.iter().sum::<f64>() / n as f64;
    let mut theta = seed.theta.clone();
    let residual = |th: &[f64]| -> Result<Vec<f64>, AnalysisError> {
        check_collision_less(th)?;
        locked_residual(th, omega_nat, p)
    };
    let mut g = residual(&theta)?;
    let mut history = vec![max_abs(&g)];
    for _ in 0..opts.max_iter {
        if *history.last().unwrap() <= opts.tol {
            return Ok(PhaseState::new(seed.t, theta));
        }
        let mut jac = stability_matrix(&theta, p) * p.coupling_over_n();
        jac.add_scalar_mut(1.0 / n as f64);
        let rhs = -DVector::from_column_slice(&g);
        let Some(delta) = jac.lu().solve(&rhs) else {
            return Err(AnalysisError::NoConvergence { history });
        };
        let current = *history.last().unwrap();
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda > 1e-6 {
            let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + lambda * d).collect();
            let shift = trial.iter().sum::<f64>() / n as f64 - mean0;
            let trial: Vec<f64> = trial.into_iter().map(|t| t - shift).collect();
            if let Ok(gt) = residual(&trial) {
                if max_abs(&gt) < current {
                    accepted = Some((trial, gt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((t, gt)) = accepted else {
            return Err(AnalysisError::NoConvergence { history });
        };
        theta = t;
        g = gt;
        history.push(max_abs(&g));
    }
    if *history.last().unwrap() <= opts.tol {
        Ok(PhaseState::new(seed.t, theta))
    } else {
        Err(AnalysisError::NoConvergence { history })
    }
}

/// Largest deviation of the relative phases from those of `equilibrium`.
pub fn relative_deviation(theta: &[f64], equilibrium: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        for j in (i + 1)..theta.len() {
            let d = (theta[j] - theta[i]) - (equilibrium[j] - equilibrium[i]);
            worst = worst.max(d.abs());
        }
    }
    worst
}

/// Deviation of relative phases at the start and end of a run started from
/// `equilibrium` displaced by `perturbation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResponse {
    pub initial: f64,
    pub r#final: f64,
    pub t_end: f64,
}

pub fn perturbation_response(
    equilibrium: &PhaseState,
    omega_nat: &NaturalFrequencies,
    p: &ModelParams,
    perturbation: &[f64],
    cfg: &IntegratorConfig,
) -> Result<PerturbationResponse, AnalysisError> {
    let start: Vec<f64> = equilibrium.theta.iter().zip(perturbation).map(|(a, b)| a + b).collect();
    let traj = integrate(&PhaseState::new(0.0, start.clone()), omega_nat, p, cfg)?;
    let last = traj.final_state().ok_or(AnalysisError::Empty)?;
    Ok(PerturbationResponse {
        initial: relative_deviation(&start, &equilibrium.theta),
        r#final: relative_deviation(&last.theta, &equilibrium.theta),
        t_end: last.t,
    })
}

fn identical(omega: &NaturalFrequencies) -> bool {
    omega.omega.windows(2).all(|w| w[0] == w[1])
}

fn diameters(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.samples.iter().map(|s| (s.t, phase_diameter(s))).collect()
}

fn freq_diameters(traj: &Trajectory) -> Result<Vec<(f64, f64)>, AnalysisError> {
    traj.samples.iter().map(|s| Ok((s.t, freq_diameter(s)?))).collect()
}

fn monotone(d: &[(f64, f64)], slack: Slack) -> Accum {
    let mut acc = Accum::new();
    for w in d.windows(2) {
        acc.push(w[1].0, w[0].1 - w[1].1 + slack.tol(w[0].1));
    }
    acc
}

/// Collision tolerance used to declare complete synchronization.
pub const SYNC_THRESHOLD: f64 = 10.0 * crate::dynamics::DEFAULT_COLLISION_TOL;

/// Identical oscillators confined to a half circle: diameter monotonicity,
/// envelopes and synchronization/collision times for each regime. `beta`
/// parametrizes the supercritical first-collision time.
pub fn check_identical_bounds(
    traj: &Trajectory,
    p: &ModelParams,
    slack: Slack,
    beta: f64,
) -> Result<Vec<BoundReport>, AnalysisError> {
    let first = traj.samples.first().ok_or(AnalysisError::Empty)?;
    let d0 = phase_diameter(first);
    let hyp = identical(&traj.omega_nat) && d0 > 0.0 && d0 < std::f64::consts::PI;
    let (a, k) = (p.alpha, p.coupling_k);
    let hd0 = h(d0, a);
    let d = diameters(traj);
    let t_last = traj.samples.last().unwrap().t;
    let mut out = Vec::new();
    let sync = |bound: f64, name: &str, reference: &str| {
        let mut acc = Accum::new();
        match sync_time(traj, SYNC_THRESHOLD) {
            Some(t) => acc.push(t, bound * (1.0 + slack.rel) - t),
            None => acc.push(t_last, if t_last < bound { 0.0 } else { -(t_last - bound) }),
        }
        acc.report(name, reference, hyp)
    };
    let expo = |reference: &str| {
        upper_bound(&d, |t| d0 * (-k * hd0 / d0 * t).exp(), slack).report("exponential_envelope", reference, hyp)
    };
    match p.regime() {
        Regime::Subcritical => {
            let r = "identical subcritical oscillators: finite-time complete phase synchronization";
            out.push(monotone(&d, slack).report("diameter_non_increasing", r, hyp));
            out.push(expo(r));
            let rate = 2.0 * a * k * hd0 * d0.powf(2.0 * a - 1.0);
            let pw: Vec<(f64, f64)> = d.iter().map(|&(t, x)| (t, x.powf(2.0 * a))).collect();
            out.push(
                upper_bound(&pw, |t| (d0.powf(2.0 * a) - rate * t).max(0.0), slack).report("power_envelope", r, hyp),
            );
            out.push(sync(d0 / (2.0 * a * k * hd0), "sync_time", r));
        }
        Regime::Critical => {
            let r = "identical critical oscillators: exponential contraction and finite-time complete synchronization";
            out.push(monotone(&d, slack).report("diameter_non_increasing", r, hyp));
            out.push(expo(r));
            out.push(sync(d0 / (k * hd0), "sync_time", r));
        }
        Regime::Supercritical => {
            let r = "identical supercritical oscillators: algebraic contraction and a first collision in finite time";
            out.push(monotone(&d, slack).report("diameter_non_increasing", r, hyp));
            let c = (2.0 * a - 1.0) * 2f64.powf(1.0 - 2.0 * a) * k * hd0 / d0.powf(2.0 * a);
            out.push(
                upper_bound(&d, |t| (d0.powf(1.0 - 2.0 * a) + c * t).powf(-1.0 / (2.0 * a - 1.0)), slack)
                    .report("algebraic_envelope", r, hyp),
            );
            let t1 = d0 / ((1.0 - beta) * k * hd0);
            let mut acc = Accum::new();
            match first_collision_time(traj) {
                Some(t) => acc.push(t, t1 * (1.0 + slack.rel) - t),
                None => acc.push(t_last, if t_last < t1 { 0.0 } else { -(t_last - t1) }),
            }
            out.push(acc.report("first_collision_time", r, hyp));
        }
    }
    Ok(out)
}

/// `D(Θ̇₀) / (h'(D^∞)(D^∞ − D(Θ₀)))` at the state `first`.
pub fn coupling_threshold(first: &PhaseState, p: &ModelParams, d_inf: f64) -> Result<f64, AnalysisError> {
    let dfreq = freq_diameter(first)?;
    let d0 = phase_diameter(first);
    Ok(dfreq / (h_prime_singular(d_inf, p) * (d_inf - d0)))
}

/// Smallest `K` with `K ≥ ratio · D(Θ̇₀(K)) / (h'(D^∞)(D^∞ − D(Θ₀)))`, where
/// `Θ̇₀(K)` is the initial frequency vector under coupling `K`. Searched on
/// `(0, k_max]`; `None` when no such `K` exists there.
pub fn coupling_for_threshold_ratio(
    theta0: &[f64],
    omega_nat: &NaturalFrequencies,
    alpha: f64,
    d_inf: f64,
    ratio: f64,
    k_max: f64,
) -> Result<Option<f64>, AnalysisError> {
    let n = theta0.len();
    let g = |k: f64| -> Result<f64, AnalysisError> {
        let p = ModelParams::new(alpha, k, n);
        let st = PhaseState::new(0.0, theta0.to_vec());
        let f = rhs_full(&st, omega_nat, &p, KernelKind::SingularH, &ClusterPartition::singletons(n))?;
        let st = PhaseState { freq: Some(f), ..st };
        Ok(k - ratio * coupling_threshold(&st, &p, d_inf)?)
    };
    let steps = 20_000;
    let mut prev = (k_max / steps as f64, g(k_max / steps as f64)?);
    if prev.1 >= 0.0 {
        return Ok(Some(prev.0));
    }
    for s in 2..=steps {
        let k = k_max * s as f64 / steps as f64;
        let v = g(k)?;
        if v >= 0.0 {
            // keep the feasible end of the bracket
            let (mut lo, mut hi) = (prev.0, k);
            while hi - lo > 1e-15 * hi {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(mid)? >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(hi));
        }
        prev = (k, v);
    }
    Ok(None)
}

/// Non-identical subcritical oscillators: uniform diameter bound, frequency
/// sandwich, absence of collisions and ordering of the locked state.
pub fn check_nonidentical_bounds(
    traj: &Trajectory,
    p: &ModelParams,
    d_inf: f64,
    slack: Slack,
) -> Result<Vec<BoundReport>, AnalysisError> {
    if p.regime() != Regime::Subcritical {
        return Err(AnalysisError::Regime { expected: "subcritical", alpha: p.alpha });
    }
    let first = traj.samples.first().ok_or(AnalysisError::Empty)?;
    let d0 = phase_diameter(first);
    let tt = theta_tilde(p.alpha)?;
    let threshold = coupling_threshold(first, p, d_inf)?;
    let omega = &traj.omega_nat.omega;
    let n = omega.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| omega[i].total_cmp(&omega[j]));
    let distinct = order.windows(2).all(|w| omega[w[0]] < omega[w[1]]);
    let ordered_at = |s: &PhaseState| order.windows(2).all(|w| s.theta[w[0]] < s.theta[w[1]]);
    let initially_ordered = ordered_at(first);
    let hyp = d0 < d_inf && d_inf < tt && p.coupling_k > threshold;
    let col_hyp = hyp && distinct && initially_ordered;
    let mut out = Vec::new();

    let d = diameters(traj);
    let mut acc = Accum::new();
    for &(t, x) in &d {
        acc.push(t, d_inf - x);
    }
    out.push(acc.report("diameter_below_d_inf", "uniform phase-diameter bound", hyp));

    let fd = freq_diameters(traj)?;
    let fd0 = fd[0].1;
    let rate = p.coupling_k * h_prime_singular(d_inf, p);
    out.push(
        upper_bound(&fd, |t| fd0 * (-rate * t).exp(), slack).report(
            "frequency_upper_envelope",
            "emergence of a phase-locked state",
            hyp,
        ),
    );

    // lower envelope from the time the phases settle into the frequency order
    let settle = (0..traj.samples.len()).rev().take_while(|&i| ordered_at(&traj.samples[i])).last();
    if distinct {
        let mut acc = Accum::new();
        if let Some(i0) = settle {
            let tail = &traj.samples[i0..];
            let eps_delta = tail
                .iter()
                .map(|s| order.windows(2).map(|w| s.theta[w[1]] - s.theta[w[0]]).fold(f64::INFINITY, f64::min))
                .fold(f64::INFINITY, f64::min);
            let (t0, base) = fd[i0];
            let lrate = p.coupling_k * h_prime_singular(eps_delta, p);
            acc = lower_bound(&fd[i0..], |t| base * (-lrate * (t - t0)).exp(), slack);
        } else {
            acc.push(traj.samples.last().unwrap().t, -1.0);
        }
        out.push(acc.report("frequency_lower_envelope", "asymptotic frequency synchronization", hyp));
    }

    let mut acc = Accum::new();
    let collisions: Vec<f64> = traj.events_of(EventKind::Collision).map(|e| e.t_event).collect();
    match collisions.first() {
        Some(&t) => acc.push(t, -(collisions.len() as f64)),
        None => acc.push(traj.samples.last().unwrap().t, 0.0),
    }
    out.push(acc.report("no_collision", "absence of collisions for ordered data", col_hyp));

    let last = traj.samples.last().unwrap();
    let mut acc = Accum::new();
    let gap = order.windows(2).map(|w| last.theta[w[1]] - last.theta[w[0]]).fold(f64::INFINITY, f64::min);
    acc.push(last.t, if gap.is_finite() { gap } else { 0.0 });
    out.push(acc.report("final_ordering", "ordering of the phase-locked state", distinct));
    Ok(out)
}

/// `θ₊ = σ / √(c(2α+1))`, where `Γ'` attains its minimum.
pub fn theta_plus(p: &ModelParams) -> f64 {
    p.sigma / (p.c_alpha_zeta * (2.0 * p.alpha + 1.0)).sqrt()
}

/// `Γ'(θ₊) sin D^∞ + Γ(D^∞) cos D^∞`.
pub fn regular_rate(p: &ModelParams, d_inf: f64) -> f64 {
    gamma_prime(theta_plus(p), p) * d_inf.sin() + gamma(d_inf, p) * d_inf.cos()
}

/// Regular-kernel model: phase-diameter sandwich for identical oscillators;
/// with `d_inf`, the diameter bound and frequency-diameter sandwich for
/// non-identical ones.
pub fn check_regular_bounds(
    traj: &Trajectory,
    p: &ModelParams,
    d_inf: Option<f64>,
    slack: Slack,
) -> Result<Vec<BoundReport>, AnalysisError> {
    let first = traj.samples.first().ok_or(AnalysisError::Empty)?;
    let d0 = phase_diameter(first);
    let k = p.coupling_k;
    let mut out = Vec::new();
    if identical(&traj.omega_nat) {
        let hyp = d0 < std::f64::consts::PI;
        let r = "regular kernel, identical oscillators: asymptotic complete phase synchronization";
        let d = diameters(traj);
        let rate = k * gamma(d0, p) * d0.sin() / d0.max(f64::MIN_POSITIVE);
        out.push(upper_bound(&d, |t| d0 * (-rate * t).exp(), slack).report("diameter_upper_envelope", r, hyp));
        out.push(lower_bound(&d, |t| d0 * (-k * t).exp(), slack).report("diameter_lower_envelope", r, hyp));
        return Ok(out);
    }
    let d_inf = d_inf.ok_or_else(|| AnalysisError::Hypothesis("non-identical runs need d_inf".into()))?;
    let rate = regular_rate(p, d_inf);
    let fd = freq_diameters(traj)?;
    let fd0 = fd[0].1;
    let thr = fd0 / (rate * (d_inf - d0));
    let hyp = d0 < d_inf
        && d_inf < std::f64::consts::FRAC_PI_2
        && -gamma_prime(theta_plus(p), p) < gamma(d_inf, p) / d_inf.tan()
        && k > thr;
    let r = "regular kernel, non-identical oscillators: complete frequency synchronization";
    let mut acc = Accum::new();
    for (t, x) in diameters(traj) {
        acc.push(t, d_inf - x);
    }
    out.push(acc.report("diameter_below_d_inf", "regular kernel: uniform phase-diameter bound", hyp));
    out.push(upper_bound(&fd, |t| fd0 * (-k * rate * t).exp(), slack).report("frequency_upper_envelope", r, hyp));
    out.push(lower_bound(&fd, |t| fd0 * (-k * t).exp(), slack).report("frequency_lower_envelope", r, hyp));
    Ok(out)
}
