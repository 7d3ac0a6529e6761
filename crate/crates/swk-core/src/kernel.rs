//! Plasticity functions, interaction kernels, their derivatives and
//! antiderivatives, and the gradient-flow potential.
//!
//! Phases are unwrapped reals; every kernel reduces its argument to the
//! representative in `(-π, π]` before evaluating `|θ|_o`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad;

const TWO_PI: f64 = 2.0 * PI;
const QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("non-finite angle {0}")]
    NonFinite(f64),
    #[error("kernel is set-valued at θ ∈ 2πℤ for α = {alpha}; request a one-sided limit or use the filippov module")]
    SetValuedPoint { alpha: f64 },
    #[error("singular derivative is undefined at θ ∈ 2πℤ")]
    SingularDerivative,
    #[error("kernel {kind:?} needs {requirement}")]
    WrongKernel { kind: KernelKind, requirement: &'static str },
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParam { name: &'static str, value: f64, reason: &'static str },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Singularity regime, determined by the exponent α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    /// `α = 1/2` is matched to within `1e-12`.
    pub fn from_alpha(alpha: f64) -> Regime {
        if (alpha - 0.5).abs() <= 1e-12 {
            Regime::Critical
        } else if alpha < 0.5 {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        }
    }
}

/// Model parameters shared by every kernel and integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub coupling_k: f64,
    pub n_osc: usize,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Decay constant of the plasticity function, `ζ^{-1/α} − 1 > 0`.
    /// Recomputed by [`ModelParams::resolved`].
    #[serde(default)]
    pub c_alpha_zeta: f64,
}

fn default_sigma() -> f64 {
    1.0
}
fn default_zeta() -> f64 {
    0.5
}
fn default_eta() -> f64 {
    1.0
}

impl ModelParams {
    /// Singular model (`ε = 0`) with default regular-model constants.
    pub fn new(alpha: f64, coupling_k: f64, n_osc: usize) -> Self {
        ModelParams {
            alpha,
            coupling_k,
            n_osc,
            epsilon: 0.0,
            sigma: default_sigma(),
            zeta: default_zeta(),
            eta: default_eta(),
            c_alpha_zeta: 0.0,
        }
        .resolved()
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_plasticity(mut self, sigma: f64, zeta: f64) -> Self {
        self.sigma = sigma;
        self.zeta = zeta;
        self.resolved()
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    /// Recomputes the derived constant `c`.
    pub fn resolved(mut self) -> Self {
        self.c_alpha_zeta = self.zeta.powf(-1.0 / self.alpha) - 1.0;
        self
    }

    pub fn regime(&self) -> Regime {
        Regime::from_alpha(self.alpha)
    }

    /// `K / N`.
    pub fn coupling_over_n(&self) -> f64 {
        self.coupling_k / self.n_osc as f64
    }

    /// Singular kernel for `ε = 0`, scaled kernel otherwise.
    pub fn default_kind(&self) -> KernelKind {
        if self.epsilon > 0.0 {
            KernelKind::ScaledHEps
        } else {
            KernelKind::SingularH
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |name, value, reason| Err(KernelError::InvalidParam { name, value, reason });
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", self.alpha, "must lie in (0,1)");
        }
        if !(self.coupling_k > 0.0 && self.coupling_k.is_finite()) {
            return bad("coupling_k", self.coupling_k, "must be positive");
        }
        if self.n_osc == 0 {
            return bad("n_osc", 0.0, "must be positive");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", self.epsilon, "must be non-negative");
        }
        if !(self.sigma > 0.0 && self.sigma < PI) {
            return bad("sigma", self.sigma, "must lie in (0,π)");
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return bad("zeta", self.zeta, "must lie in (0,1)");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta", self.eta, "must be positive");
        }
        if !(self.c_alpha_zeta > 0.0) {
            return bad("c_alpha_zeta", self.c_alpha_zeta, "must be positive");
        }
        Ok(())
    }
}

/// Which interaction law drives the phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Γ alone (the adaptive coupling target).
    AdaptiveGamma,
    /// `Γ(θ) sin θ`.
    RegularH,
    /// `sin θ / (ε² + |θ|_o²)^α`.
    ScaledHEps,
    /// `sin θ / |θ|_o^{2α}`.
    SingularH,
}

impl KernelKind {
    pub fn check(self, p: &ModelParams) -> Result<(), KernelError> {
        match self {
            KernelKind::SingularH if p.epsilon != 0.0 => Err(KernelError::WrongKernel {
                kind: self,
                requirement: "epsilon = 0",
            }),
            KernelKind::ScaledHEps if p.epsilon <= 0.0 => Err(KernelError::WrongKernel {
                kind: self,
                requirement: "epsilon > 0",
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Kernel value that may be unbounded at a supercritical singularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelValue {
    Finite(f64),
    PosInfinity,
    NegInfinity,
}

impl KernelValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            KernelValue::Finite(v) => Some(v),
            _ => None,
        }
    }
}

/// Representative of `θ` modulo 2π in `(-π, π]`.
#[inline]
pub fn wrap(theta: f64) -> f64 {
    let r = theta.rem_euclid(TWO_PI);
    if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

#[inline]
fn od(theta: f64) -> f64 {
    // reducing |θ| keeps the distance exactly even
    wrap(theta.abs()).abs()
}

pub fn orthodromic_distance(theta: f64) -> Result<f64, KernelError> {
    finite(theta)?;
    Ok(od(theta))
}

fn finite(theta: f64) -> Result<(), KernelError> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(KernelError::NonFinite(theta))
    }
}

/// Plasticity function `Γ(θ) = σ^{2α} / (σ² + c|θ|_o²)^α`.
pub fn gamma_regular(theta: f64, p: &ModelParams) -> Result<f64, KernelError> {
    finite(theta)?;
    Ok(gamma(theta, p))
}

#[inline]
pub(crate) fn gamma(theta: f64, p: &ModelParams) -> f64 {
    let d = od(theta);
    let s2 = p.sigma * p.sigma;
    (s2 / (s2 + p.c_alpha_zeta * d * d)).powf(p.alpha)
}

/// Signed derivative of Γ with respect to θ (off the antipodal point).
pub fn gamma_prime(theta: f64, p: &ModelParams) -> f64 {
    let t = wrap(theta);
    let s2 = p.sigma * p.sigma;
    let den = s2 + p.c_alpha_zeta * t * t;
    -2.0 * p.sigma.powf(2.0 * p.alpha) * p.alpha * p.c_alpha_zeta * t / den.powf(p.alpha + 1.0)
}

/// Singular kernel with its continuous extension in the subcritical regime.
pub fn h_singular(theta: f64, alpha: f64) -> Result<f64, KernelError> {
    finite(theta)?;
    let d = od(theta);
    if d == 0.0 {
        return match Regime::from_alpha(alpha) {
            Regime::Subcritical => Ok(0.0),
            _ => Err(KernelError::SetValuedPoint { alpha }),
        };
    }
    Ok(theta.sin() / d.powf(2.0 * alpha))
}

/// One-sided limit of the singular kernel; identical to [`h_singular`] off 2πℤ.
pub fn h_singular_onesided(theta: f64, alpha: f64, side: Side) -> Result<KernelValue, KernelError> {
    finite(theta)?;
    if od(theta) != 0.0 {
        return h_singular(theta, alpha).map(KernelValue::Finite);
    }
    Ok(match (Regime::from_alpha(alpha), side) {
        (Regime::Subcritical, _) => KernelValue::Finite(0.0),
        (Regime::Critical, Side::Right) => KernelValue::Finite(1.0),
        (Regime::Critical, Side::Left) => KernelValue::Finite(-1.0),
        (Regime::Supercritical, Side::Right) => KernelValue::PosInfinity,
        (Regime::Supercritical, Side::Left) => KernelValue::NegInfinity,
    })
}

/// Scaled regularized kernel `sin θ / (ε² + |θ|_o²)^α`.
pub fn h_scaled(theta: f64, p: &ModelParams) -> Result<f64, KernelError> {
    finite(theta)?;
    KernelKind::ScaledHEps.check(p)?;
    Ok(scaled(theta, p.epsilon, p.alpha))
}

#[inline]
fn scaled(theta: f64, eps: f64, alpha: f64) -> f64 {
    let d = od(theta);
    theta.sin() / (eps * eps + d * d).powf(alpha)
}

/// Regular kernel `Γ(θ) sin θ`.
pub fn h_regular(theta: f64, p: &ModelParams) -> Result<f64, KernelError> {
    finite(theta)?;
    Ok(gamma(theta, p) * theta.sin())
}

/// Unchecked kernel evaluation used on hot paths. The singular kernel returns
/// `0` exactly at 2πℤ; callers exclude coinciding pairs before calling.
#[inline]
pub fn kernel_value(kind: KernelKind, theta: f64, p: &ModelParams) -> f64 {
    match kind {
        KernelKind::SingularH => {
            let d = od(theta);
            if d == 0.0 {
                0.0
            } else {
                theta.sin() / d.powf(2.0 * p.alpha)
            }
        }
        KernelKind::ScaledHEps => scaled(theta, p.epsilon, p.alpha),
        KernelKind::RegularH => gamma(theta, p) * theta.sin(),
        KernelKind::AdaptiveGamma => gamma(theta, p),
    }
}

/// Derivative `h'(θ)` of the scaled (`ε > 0`) or singular (`ε = 0`) kernel.
pub fn h_prime(theta: f64, p: &ModelParams) -> Result<f64, KernelError> {
    finite(theta)?;
    if p.epsilon == 0.0 && od(theta) == 0.0 {
        return Err(KernelError::SingularDerivative);
    }
    Ok(kernel_derivative(p.default_kind(), theta, p))
}

/// Unchecked derivative for any kernel kind (the singular one returns `NaN`
/// at 2πℤ).
pub fn kernel_derivative(kind: KernelKind, theta: f64, p: &ModelParams) -> f64 {
    let a = p.alpha;
    let d = od(theta);
    match kind {
        KernelKind::SingularH => {
            if d == 0.0 {
                return f64::NAN;
            }
            d.powf(-2.0 * a) * (theta.cos() - 2.0 * a * d.sin() / d)
        }
        KernelKind::ScaledHEps => regularized_derivative(theta, p.epsilon * p.epsilon, 1.0, a, 1.0),
        KernelKind::RegularH => {
            let s2 = p.sigma * p.sigma;
            regularized_derivative(theta, s2, p.c_alpha_zeta, a, p.sigma.powf(2.0 * a))
        }
        KernelKind::AdaptiveGamma => gamma_prime(theta, p),
    }
}

/// `scale · (e2 + c|θ|²)^{-α} [cos θ − 2αc |θ| sin|θ| / (e2 + c|θ|²)]`.
fn regularized_derivative(theta: f64, e2: f64, c: f64, a: f64, scale: f64) -> f64 {
    let d = od(theta);
    let den = e2 + c * d * d;
    scale * den.powf(-a) * (theta.cos() - 2.0 * a * c * d * d.sin() / den)
}

/// Onset `c(α, β) = ((2α − β)/β)^{1/2}` of the power-law lower bound
/// `h_ε(θ) ≥ h_ε(θ*) (θ/θ*)^β` on `[c(α,β) ε, θ*]`.
pub fn lower_bound_onset(alpha: f64, beta: f64) -> f64 {
    ((2.0 * alpha - beta) / beta).sqrt()
}

/// Antiderivative `W(θ) = ∫₀^θ h` of the default kernel of `p`.
pub fn w_antiderivative(theta: f64, p: &ModelParams) -> f64 {
    w_kind(p.default_kind(), theta, p)
}

/// Antiderivative of the given kernel; even and 2π-periodic.
pub fn w_kind(kind: KernelKind, theta: f64, p: &ModelParams) -> f64 {
    let x = od(theta);
    if x == 0.0 {
        return 0.0;
    }
    match kind {
        KernelKind::SingularH => w_singular(x, p.alpha),
        KernelKind::ScaledHEps => {
            let e = p.epsilon;
            let f = |t: f64| scaled(t, e, p.alpha);
            let knee = (10.0 * e).min(x);
            quad::integrate(f, 0.0, knee, 0.5 * QUAD_TOL) + quad::integrate(f, knee, x, 0.5 * QUAD_TOL)
        }
        KernelKind::RegularH | KernelKind::AdaptiveGamma => {
            quad::integrate(|t| gamma(t, p) * t.sin(), 0.0, x, QUAD_TOL)
        }
    }
}

/// `∫₀^x sin t / t^{2α} dt` split as the analytic leading term plus a smooth
/// remainder.
fn w_singular(x: f64, alpha: f64) -> f64 {
    let p = 2.0 - 2.0 * alpha;
    let lead = x.powf(p) / p;
    let rest = quad::integrate(
        |t| sin_minus_id(t) * t.powf(-2.0 * alpha),
        0.0,
        x,
        QUAD_TOL,
    );
    lead + rest
}

/// `sin t − t` without cancellation for small `t`.
fn sin_minus_id(t: f64) -> f64 {
    if t.abs() < 0.1 {
        let t2 = t * t;
        -t * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0 * (1.0 - t2 / 110.0))))
    } else {
        t.sin() - t
    }
}

/// Gradient-flow potential `(V, V_int)` of the default kernel of `p`, with
/// `V = −Σ Ωᵢθᵢ + V_int` and `V_int = (K/2N) Σ_{i≠j} W(θⱼ − θᵢ)`.
pub fn potential(theta: &[f64], omega: &[f64], p: &ModelParams) -> Result<(f64, f64), KernelError> {
    potential_kind(p.default_kind(), theta, omega, p)
}

pub fn potential_kind(
    kind: KernelKind,
    theta: &[f64],
    omega: &[f64],
    p: &ModelParams,
) -> Result<(f64, f64), KernelError> {
    if theta.len() != omega.len() {
        return Err(KernelError::LengthMismatch { expected: theta.len(), got: omega.len() });
    }
    if theta.len() != p.n_osc {
        return Err(KernelError::LengthMismatch { expected: p.n_osc, got: theta.len() });
    }
    let mut pair_sum = 0.0;
    for i in 0..theta.len() {
        for j in (i + 1)..theta.len() {
            pair_sum += 2.0 * w_kind(kind, theta[j] - theta[i], p);
        }
    }
    let v_int = 0.5 * p.coupling_over_n() * pair_sum;
    let linear: f64 = theta.iter().zip(omega).map(|(t, o)| o * t).sum();
    Ok((v_int - linear, v_int))
}
