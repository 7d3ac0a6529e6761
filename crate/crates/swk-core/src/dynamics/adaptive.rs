//! Phase model with plastic couplings `a_ij` relaxing toward `Γ(θⱼ − θᵢ)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::stepper::{self, System};
use super::{DynamicsError, IntegratorConfig, Method};
use crate::kernel::{gamma, ModelParams};
use crate::state::{NaturalFrequencies, PhaseState, StateError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveState {
    pub theta: Vec<f64>,
    /// Coupling degrees `a_ij`, row `i` column `j`.
    pub a: Vec<Vec<f64>>,
}

impl AdaptiveState {
    /// Couplings already at their fast-learning target, `a_ij = Γ(θⱼ − θᵢ)`.
    pub fn well_prepared(theta: Vec<f64>, p: &ModelParams) -> Self {
        let a = theta.iter().map(|ti| theta.iter().map(|tj| gamma(tj - ti, p)).collect()).collect();
        AdaptiveState { theta, a }
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = self.theta.clone();
        for row in &self.a {
            y.extend_from_slice(row);
        }
        y
    }

    fn unpack(y: &[f64], n: usize) -> Self {
        AdaptiveState { theta: y[..n].to_vec(), a: (0..n).map(|i| y[n + i * n..n + (i + 1) * n].to_vec()).collect() }
    }

    fn validate(&self, n: usize) -> Result<(), StateError> {
        if self.theta.len() != n {
            return Err(StateError::Length { expected: n, got: self.theta.len() });
        }
        for row in &self.a {
            if row.len() != n {
                return Err(StateError::Length { expected: n, got: row.len() });
            }
        }
        if self.a.len() != n {
            return Err(StateError::Length { expected: n, got: self.a.len() });
        }
        let flat = self.pack();
        if let Some(i) = flat.iter().position(|v| !v.is_finite()) {
            return Err(StateError::NonFinite(i));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveTrajectory {
    pub samples: Vec<PhaseState>,
    /// Coupling matrix at each sample time.
    pub couplings: Vec<Vec<Vec<f64>>>,
}

struct Adaptive<'a> {
    p: &'a ModelParams,
    omega: &'a [f64],
}

impl System for Adaptive<'_> {
    fn dim(&self) -> usize {
        let n = self.omega.len();
        n + n * n
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let n = self.omega.len();
        let kn = self.p.coupling_over_n();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                let d = y[j] - y[i];
                let a = y[n + i * n + j];
                s += a * d.sin();
                out[n + i * n + j] = self.p.eta * (gamma(d, self.p) - a);
            }
            out[i] = self.omega[i] + kn * s;
        }
    }

    fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        // forward differences; only the Rosenbrock option needs this
        let m = self.dim();
        let mut f0 = vec![0.0; m];
        self.rhs(y, &mut f0);
        let mut jac = DMatrix::zeros(m, m);
        let mut yp = y.to_vec();
        let mut f1 = vec![0.0; m];
        for c in 0..m {
            let h = 1e-7 * (1.0 + y[c].abs());
            yp[c] = y[c] + h;
            self.rhs(&yp, &mut f1);
            for r in 0..m {
                jac[(r, c)] = (f1[r] - f0[r]) / h;
            }
            yp[c] = y[c];
        }
        jac
    }
}

/// `(θ̇, ȧ)` with `θ̇ᵢ = Ωᵢ + (1/N) Σⱼ K a_ij sin(θⱼ − θᵢ)` and
/// `ȧ_ij = η (Γ(θⱼ − θᵢ) − a_ij)`.
pub fn rhs_adaptive(
    state: &AdaptiveState,
    omega_nat: &NaturalFrequencies,
    p: &ModelParams,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), DynamicsError> {
    let n = omega_nat.len();
    state.validate(n)?;
    let sys = Adaptive { p, omega: &omega_nat.omega };
    let mut out = vec![0.0; sys.dim()];
    sys.rhs(&state.pack(), &mut out);
    let d = AdaptiveState::unpack(&out, n);
    Ok((d.theta, d.a))
}

/// Smooth integration of the adaptive model on `[0, t_end]`,
/// sampled every `sample_dt`.
pub fn integrate_adaptive(
    init: &AdaptiveState,
    omega_nat: &NaturalFrequencies,
    p: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<AdaptiveTrajectory, DynamicsError> {
    p.validate()?;
    cfg.validate()?;
    let n = omega_nat.len();
    if n != p.n_osc {
        return Err(StateError::Length { expected: p.n_osc, got: n }.into());
    }
    init.validate(n)?;
    let sys = Adaptive { p, omega: &omega_nat.omega };
    let mut traj = AdaptiveTrajectory { samples: Vec::new(), couplings: Vec::new() };
    let mut push = |t: f64, y: &[f64]| {
        let mut f = vec![0.0; y.len()];
        sys.rhs(y, &mut f);
        let s = AdaptiveState::unpack(y, n);
        traj.samples.push(PhaseState { t, theta: s.theta, freq: Some(f[..n].to_vec()) });
        traj.couplings.push(s.a);
    };
    let mut y = init.pack();
    let order = match cfg.method {
        Method::Rk45 => 5.0,
        Method::GradientFlow => 2.0,
    };
    let t_end = cfg.t_end;
    let mut t = 0.0;
    push(t, &y);
    let mut k = 1usize;
    let mut h = cfg.dt_max.min(cfg.sample_dt).min(1e-3 / p.eta.max(1.0));
    let mut steps = 0usize;
    while t < t_end {
        let target = (k as f64 * cfg.sample_dt).min(t_end);
        steps += 1;
        if steps > cfg.max_steps {
            return Err(DynamicsError::TooManySteps(cfg.max_steps));
        }
        let hh = h.min(target - t).min(cfg.dt_max);
        let trial = match cfg.method {
            Method::Rk45 => stepper::dopri5(&sys, &y, hh, cfg.rel_tol, cfg.abs_tol),
            Method::GradientFlow => stepper::ros2(&sys, &y, hh, cfg.rel_tol, cfg.abs_tol),
        };
        let finite = trial.err.is_finite() && trial.y.iter().all(|v| v.is_finite());
        if !finite || trial.err > 1.0 {
            h = hh * if finite { (0.9 * trial.err.powf(-1.0 / order)).clamp(0.1, 0.9) } else { 0.25 };
            if h < cfg.dt_min {
                return Err(if finite {
                    DynamicsError::StepUnderflow { t, h, neighborhood: y[..n].to_vec() }
                } else {
                    DynamicsError::NonFinite { t }
                });
            }
            continue;
        }
        t = if hh == target - t { target } else { t + hh };
        y = trial.y;
        if t >= target {
            push(t, &y);
            k += 1;
        }
        let grow = if trial.err == 0.0 { 5.0 } else { (0.9 * trial.err.powf(-1.0 / order)).clamp(0.2, 5.0) };
        h = if hh < h { h.max(hh * grow) } else { hh * grow };
    }
    Ok(traj)
}
