//! Singular-limit and fast-learning comparison harnesses, plus the weak
//! residual of the second-order form of the subcritical dynamics.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{integrate, integrate_adaptive, integrate_kind, AdaptiveState, DynamicsError, IntegratorConfig};
use crate::filippov::{build_polytope, membership_residual};
use crate::kernel::{kernel_derivative, potential_kind, KernelKind, ModelParams, Regime};
use crate::state::{NaturalFrequencies, PhaseState, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    /// `max_t max_i |θᵢ^ε − θᵢ⁰|` over the common sample grid.
    pub sup_dist: f64,
    /// `(∫₀^T |Θ̇^ε|²)^{1/2}`.
    pub h1_seminorm: f64,
    /// `max_t max_i |θ̇ᵢ^ε|`.
    pub linf_freq: f64,
    /// `min_t [C_Ω² t/2 + V_int^ε(Θ₀) − ½∫₀^t |Θ̇^ε|²]`; non-negative when the
    /// energy inequality holds at every sample.
    pub energy_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub regime: Regime,
    pub rows: Vec<SweepRow>,
    /// `C_Ω + K`, the frequency bound of the critical regime.
    pub linf_bound: f64,
    /// Largest Filippov-membership residual of the `ε = 0` samples.
    pub membership_residual: f64,
    /// Time of the worst membership residual.
    pub membership_worst_t: f64,
    pub reference: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaRow {
    pub eta: f64,
    pub sup_dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub windows: usize,
    /// `(t_start, t_end, residual)` per evaluated window.
    pub per_window: Vec<(f64, f64, f64)>,
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Largest componentwise phase gap at sample times present in both runs.
pub fn sup_distance(a: &[PhaseState], b: &[PhaseState]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut worst = 0.0f64;
    while i < a.len() && j < b.len() {
        if same_time(a[i].t, b[j].t) {
            for (x, y) in a[i].theta.iter().zip(&b[j].theta) {
                worst = worst.max((x - y).abs());
            }
            i += 1;
            j += 1;
        } else if a[i].t < b[j].t {
            i += 1;
        } else {
            j += 1;
        }
    }
    worst
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn row_for(eps: f64, run: &Trajectory, reference: &Trajectory, c_omega: f64, v_int0: f64) -> SweepRow {
    let mut integral = 0.0;
    let mut margin = f64::INFINITY;
    let mut linf = 0.0f64;
    let mut prev: Option<(f64, f64)> = None;
    for s in &run.samples {
        let f = s.freq.as_deref().unwrap_or(&[]);
        let q = norm2(f);
        linf = f.iter().fold(linf, |m, x| m.max(x.abs()));
        if let Some((t0, q0)) = prev {
            integral += 0.5 * (s.t - t0) * (q0 + q);
        }
        prev = Some((s.t, q));
        margin = margin.min(0.5 * c_omega * c_omega * s.t + v_int0 - 0.5 * integral);
    }
    SweepRow {
        eps,
        sup_dist: sup_distance(&run.samples, &reference.samples),
        h1_seminorm: integral.sqrt(),
        linf_freq: linf,
        energy_margin: margin,
    }
}

/// Runs the singular reference and one regularized run per `ε` (in parallel)
/// and tabulates convergence and a-priori-bound diagnostics.
pub fn epsilon_sweep(
    init: &PhaseState,
    omega_nat: &NaturalFrequencies,
    p_base: &ModelParams,
    eps_list: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SweepReport, DynamicsError> {
    if eps_list.is_empty() {
        return Err(DynamicsError::InvalidConfig("empty epsilon list".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) || eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(DynamicsError::InvalidConfig("epsilon list must be positive and strictly decreasing".into()));
    }
    let p0 = p_base.clone().with_epsilon(0.0);
    let reference = integrate(init, omega_nat, &p0, cfg)?;

    let rows = eps_list
        .par_iter()
        .map(|&eps| {
            let pe = p_base.clone().with_epsilon(eps);
            let run = integrate_kind(KernelKind::ScaledHEps, init, omega_nat, &pe, cfg)?;
            let (_, v_int0) = potential_kind(KernelKind::ScaledHEps, &init.theta, &omega_nat.omega, &pe)?;
            Ok(row_for(eps, &run, &reference, omega_nat.c_omega, v_int0))
        })
        .collect::<Result<Vec<_>, DynamicsError>>()?;

    let mut worst = (0.0f64, init.t);
    for s in &reference.samples {
        let partition = reference.partition_at(s.t);
        let poly = build_polytope(s, omega_nat, &p0, &partition)
            .map_err(|e| DynamicsError::InvalidConfig(e.to_string()))?;
        let r = membership_residual(&poly, s.freq.as_deref().unwrap_or(&[]));
        if r > worst.0 {
            worst = (r, s.t);
        }
    }
    Ok(SweepReport {
        regime: p0.regime(),
        rows,
        linf_bound: omega_nat.c_omega + p_base.coupling_k,
        membership_residual: worst.0,
        membership_worst_t: worst.1,
        reference,
    })
}

/// Adaptive-coupling runs with well-prepared couplings against the
/// regular-kernel model they reduce to as `η → ∞`.
pub fn eta_sweep(
    init: &PhaseState,
    omega_nat: &NaturalFrequencies,
    p_base: &ModelParams,
    etas: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<EtaRow>, DynamicsError> {
    let reference = integrate_kind(KernelKind::RegularH, init, omega_nat, p_base, cfg)?;
    etas.par_iter()
        .map(|&eta| {
            let p = p_base.clone().with_eta(eta);
            let start = AdaptiveState::well_prepared(init.theta.clone(), &p);
            let run = integrate_adaptive(&start, omega_nat, &p, cfg)?;
            Ok(EtaRow { eta, sup_dist: sup_distance(&run.samples, &reference.samples) })
        })
        .collect()
}

/// Trapezoid rule over possibly non-uniform nodes.
fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2).zip(f.windows(2)).map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1])).sum()
}

/// Weak residual of `θ̈ᵢ = (K/N) Σ_{j∉Sᵢ} h'(θⱼ − θᵢ)(θ̇ⱼ − θ̇ᵢ)` on every
/// event-free window, tested against `φ_k(s) = sin(πs) sin(kπs)`, `k = 1..3`:
/// `|∫ θ̇ᵢ φ' + ∫ Fᵢ φ|`.
pub fn second_order_residual(traj: &Trajectory, p: &ModelParams) -> Result<ResidualReport, DynamicsError> {
    if p.regime() != Regime::Subcritical {
        return Err(DynamicsError::Unsupported("the second-order form needs a subcritical kernel"));
    }
    let kind = p.default_kind();
    let (Some(first), Some(last)) = (traj.samples.first(), traj.samples.last()) else {
        return Ok(ResidualReport { max_residual: 0.0, windows: 0, per_window: Vec::new() });
    };
    let mut cuts = vec![first.t, last.t];
    let mut contacts = Vec::new();
    for e in &traj.events {
        cuts.push(e.t_event);
        if let Some(tc) = e.t_contact {
            cuts.push(tc);
            if tc > e.t_event {
                contacts.push((e.t_event, tc));
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| same_time(*a, *b));

    let kn = p.coupling_over_n();
    let mut report = ResidualReport { max_residual: 0.0, windows: 0, per_window: Vec::new() };
    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        // the final approach of a merging pair is not governed by the window's partition
        if contacts.iter().any(|&(a, b)| a < t1 && b > t0) {
            continue;
        }
        let samples: Vec<&PhaseState> = traj.samples.iter().filter(|s| s.t >= t0 && s.t <= t1).collect();
        if samples.len() < 8 {
            continue;
        }
        let labels = traj.partition_at(0.5 * (t0 + t1)).labels();
        let len = t1 - t0;
        let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let n = labels.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let force: Vec<f64> = samples
                .iter()
                .map(|s| {
                    let f = s.freq.as_ref().expect("event-driven samples carry frequencies");
                    (0..n)
                        .filter(|&j| labels[j] != labels[i])
                        .map(|j| kernel_derivative(kind, s.theta[j] - s.theta[i], p) * (f[j] - f[i]))
                        .sum::<f64>()
                        * kn
                })
                .collect();
            for k in 1..=3 {
                let kf = k as f64;
                let phi = |t: f64| {
                    let s = (t - t0) / len;
                    (PI * s).sin() * (kf * PI * s).sin()
                };
                let dphi = |t: f64| {
                    let s = (t - t0) / len;
                    PI / len * ((PI * s).cos() * (kf * PI * s).sin() + kf * (PI * s).sin() * (kf * PI * s).cos())
                };
                let lhs: Vec<f64> =
                    samples.iter().map(|s| s.freq.as_ref().unwrap()[i] * dphi(s.t)).collect();
                let rhs: Vec<f64> = samples.iter().zip(&force).map(|(s, f)| f * phi(s.t)).collect();
                let r = (trapezoid(&ts, &lhs) + trapezoid(&ts, &rhs)).abs();
                worst = worst.max(r);
            }
        }
        report.windows += 1;
        report.per_window.push((t0, t1, worst));
        report.max_residual = report.max_residual.max(worst);
    }
    Ok(report)
}
