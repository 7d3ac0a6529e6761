//! Integrators for the adaptive, regular, regularized and singular models,
//! event-driven collision handling, and singular-limit harnesses.

mod adaptive;
mod engine;
pub(crate) mod stepper;
mod sweep;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{kernel_derivative, kernel_value, orthodromic_distance, wrap, KernelError, KernelKind, ModelParams, Regime};
use crate::state::{ClusterPartition, NaturalFrequencies, PhaseState, StateError, Trajectory};

pub use adaptive::{integrate_adaptive, rhs_adaptive, AdaptiveState, AdaptiveTrajectory};
pub use sweep::{
    epsilon_sweep, eta_sweep, second_order_residual, sup_distance, EtaRow, ResidualReport, SweepReport,
    SweepRow,
};

pub const DEFAULT_COLLISION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("oscillators {i} and {j} collide; the event handler must resolve this state")]
    EventNeeded { i: usize, j: usize },
    #[error("step size underflow at t = {t} (h = {h}); phases near the event: {neighborhood:?}")]
    StepUnderflow { t: f64, h: f64, neighborhood: Vec<f64> },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("Zeno-like accumulation: {count} events within {window} of t = {t}")]
    Zeno { t: f64, count: usize, window: f64 },
    #[error("event budget of {0} exhausted")]
    TooManyEvents(usize),
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Explicit Dormand–Prince 5(4); steps past its stability limit use the
    /// Rosenbrock scheme instead.
    Rk45,
    /// Linearly-implicit Rosenbrock step on the gradient flow.
    GradientFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub collision_tol: f64,
    pub event_bisection_tol: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    /// Natural frequencies closer than this count as equal when merging.
    pub merge_tol: f64,
    /// Safety factor of the supercritical step cap.
    pub dt_safety: f64,
    /// Abort when more events than this fall within one bisection window.
    pub zeno_limit: usize,
    pub max_events: usize,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk45,
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            dt_max: 0.05,
            dt_min: 1e-18,
            collision_tol: DEFAULT_COLLISION_TOL,
            event_bisection_tol: 1e-10,
            t_end: 1.0,
            sample_dt: 1e-2,
            merge_tol: 1e-12,
            dt_safety: 0.1,
            zeno_limit: 50,
            max_events: 10_000,
            max_steps: 20_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_sample_dt(mut self, dt: f64) -> Self {
        self.sample_dt = dt;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidConfig(m.to_string()));
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return bad("need 0 < dt_min ≤ dt_max");
        }
        if !(self.collision_tol > 0.0 && self.event_bisection_tol > 0.0) {
            return bad("event tolerances must be positive");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and non-negative");
        }
        if !(self.sample_dt > 0.0) {
            return bad("sample_dt must be positive");
        }
        Ok(())
    }
}

/// Reduced vector field over cluster phases:
/// `ϑ̇_k = Ω̂_k + (K/N) Σ_{m≠k} n_m h(ϑ_m − ϑ_k)`.
pub(crate) struct Reduced<'a> {
    pub kind: KernelKind,
    pub p: &'a ModelParams,
    pub omega_hat: Vec<f64>,
    pub weight: Vec<f64>,
    /// Half-width of a band around contact inside which the kernel is
    /// replaced by its chord through `±band`; 0 disables it.
    pub band: f64,
}

impl Reduced<'_> {
    pub fn new<'a>(kind: KernelKind, p: &'a ModelParams, partition: &ClusterPartition, omega: &[f64]) -> Reduced<'a> {
        let omega_hat = partition
            .clusters
            .iter()
            .map(|c| c.iter().map(|&i| omega[i]).sum::<f64>() / c.len() as f64)
            .collect();
        let weight = partition.clusters.iter().map(|c| c.len() as f64).collect();
        Reduced { kind, p, omega_hat, weight, band: 0.0 }
    }

    /// Subcritical kernels are only Hölder at contact: steps longer than the
    /// gap of a pair locked below resolution overshoot the contact point and
    /// settle on spurious fixed points of the discrete scheme. The chord is
    /// odd like `h`, so the motion of the pair's centre is unchanged; only its
    /// relative phase inside the band differs.
    pub fn with_band(mut self, band: f64) -> Self {
        self.band = band;
        self
    }

    fn value(&self, theta: f64) -> f64 {
        let w = wrap(theta);
        if w.abs() < self.band {
            kernel_value(self.kind, self.band, self.p) * w / self.band
        } else {
            kernel_value(self.kind, theta, self.p)
        }
    }

    fn derivative(&self, theta: f64) -> f64 {
        if wrap(theta).abs() < self.band {
            kernel_value(self.kind, self.band, self.p) / self.band
        } else {
            kernel_derivative(self.kind, theta, self.p)
        }
    }
}

impl stepper::System for Reduced<'_> {
    fn dim(&self) -> usize {
        self.omega_hat.len()
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let kn = self.p.coupling_over_n();
        out.copy_from_slice(&self.omega_hat);
        for k in 0..y.len() {
            for m in (k + 1)..y.len() {
                let h = self.value(y[m] - y[k]);
                out[k] += kn * self.weight[m] * h;
                out[m] -= kn * self.weight[k] * h;
            }
        }
    }

    fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        let kn = self.p.coupling_over_n();
        let n = y.len();
        let mut j = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut diag = 0.0;
            for m in 0..n {
                if m != k {
                    let v = kn * self.weight[m] * self.derivative(y[m] - y[k]);
                    j[(k, m)] = v;
                    diag -= v;
                }
            }
            j[(k, k)] = diag;
        }
        j
    }
}

fn blocks_on_contact(kind: KernelKind, p: &ModelParams) -> bool {
    kind == KernelKind::SingularH && p.regime() != Regime::Subcritical
}

/// `θ̇ᵢ = Ωᵢ + (K/N) Σ_{j∉𝒞ᵢ} h(θⱼ − θᵢ)`; pairs inside a cluster contribute
/// nothing.
pub fn rhs_full(
    state: &PhaseState,
    omega_nat: &NaturalFrequencies,
    p: &ModelParams,
    kind: KernelKind,
    partition: &ClusterPartition,
) -> Result<Vec<f64>, DynamicsError> {
    let n = state.theta.len();
    state.validate(omega_nat.len())?;
    kind.check(p)?;
    let labels = partition.labels();
    let kn = p.coupling_over_n();
    let mut out = omega_nat.omega.clone();
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                continue;
            }
            let d = state.theta[j] - state.theta[i];
            if blocks_on_contact(kind, p) && orthodromic_distance(d)? <= DEFAULT_COLLISION_TOL {
                return Err(DynamicsError::EventNeeded { i: i.min(j), j: i.max(j) });
            }
            out[i] += kn * kernel_value(kind, d, p);
        }
    }
    Ok(out)
}

/// Reduced system over cluster phases with cluster-averaged natural
/// frequencies.
pub fn rhs_reduced(
    cluster_phases: &[f64],
    partition: &ClusterPartition,
    omega_nat: &NaturalFrequencies,
    p: &ModelParams,
) -> Result<Vec<f64>, DynamicsError> {
    use stepper::System;
    if cluster_phases.len() != partition.kappa() {
        return Err(StateError::Length { expected: partition.kappa(), got: cluster_phases.len() }.into());
    }
    let kind = p.default_kind();
    if blocks_on_contact(kind, p) {
        for a in 0..cluster_phases.len() {
            for b in (a + 1)..cluster_phases.len() {
                if orthodromic_distance(cluster_phases[b] - cluster_phases[a])? <= DEFAULT_COLLISION_TOL {
                    return Err(DynamicsError::EventNeeded {
                        i: partition.clusters[a][0],
                        j: partition.clusters[b][0],
                    });
                }
            }
        }
    }
    let sys = Reduced::new(kind, p, partition, &omega_nat.omega);
    let mut out = vec![0.0; cluster_phases.len()];
    sys.rhs(cluster_phases, &mut out);
    Ok(out)
}

/// Integrates the default kernel of `p` (singular for `ε = 0`).
pub fn integrate(
    init: &PhaseState,
    omega_nat: &NaturalFrequencies,
    p: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    integrate_kind(p.default_kind(), init, omega_nat, p, cfg)
}

/// Integrates the phase model driven by `kind`. Collisions are detected and
/// resolved only for the singular kernel; the other kernels are Lipschitz.
pub fn integrate_kind(
    kind: KernelKind,
    init: &PhaseState,
    omega_nat: &NaturalFrequencies,
    p: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    if kind == KernelKind::AdaptiveGamma {
        return Err(DynamicsError::Unsupported("use integrate_adaptive for the adaptive model"));
    }
    p.validate()?;
    kind.check(p)?;
    cfg.validate()?;
    init.validate(p.n_osc)?;
    if omega_nat.len() != p.n_osc {
        return Err(StateError::Length { expected: p.n_osc, got: omega_nat.len() }.into());
    }
    engine::Engine::new(kind, init, omega_nat, p, cfg).run()
}
