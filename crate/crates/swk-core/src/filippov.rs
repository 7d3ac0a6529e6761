//! Set-valued right-hand side at collisions: frequency polytopes, their
//! half-space membership tests, sticking predicates and skew-symmetric
//! witness constructions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{kernel_value, KernelKind, ModelParams, Regime};
use crate::state::{ClusterPartition, NaturalFrequencies, PhaseState};

/// Absolute slack on predicate inequalities.
pub const PREDICATE_TOL: f64 = 1e-10;
/// Largest cluster for which a bounded witness is searched exactly.
pub const WITNESS_MAX_N: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilippovError {
    #[error("x·j = {sum} ≠ 0: no skew-symmetric Y with Y·j = x")]
    Unbalanced { sum: f64 },
    #[error("prefix of size {m} over indices {indices:?} sums to {sum}, outside ±{bound}")]
    Infeasible { m: usize, indices: Vec<usize>, sum: f64, bound: f64 },
    #[error("polytopes are defined for the singular model only (ε = {0})")]
    Regularized(f64),
    #[error("partition does not cover {0} oscillators")]
    BadPartition(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
}

/// Skew-symmetric matrix stored by its strict upper triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewMatrix {
    pub n: usize,
    upper: Vec<f64>,
    pub bound: Option<f64>,
}

impl SkewMatrix {
    pub fn zeros(n: usize) -> Self {
        SkewMatrix { n, upper: vec![0.0; n * n.saturating_sub(1) / 2], bound: None }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        // i < j
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => 0.0,
            Less => self.upper[self.slot(i, j)],
            Greater => -self.upper[self.slot(j, i)],
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => {}
            Less => {
                let s = self.slot(i, j);
                self.upper[s] = v;
            }
            Greater => {
                let s = self.slot(j, i);
                self.upper[s] = -v;
            }
        }
    }

    /// `Y · j`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }
}

/// Relative natural frequencies `m_ij = Ω_{σᵢ} − Ω_{σⱼ}` of a cluster (or any
/// skew matrix supplied by the caller).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeFrequencyMatrix {
    pub m: usize,
    pub entries: Vec<Vec<f64>>,
}

impl RelativeFrequencyMatrix {
    pub fn from_omegas(omegas: &[f64]) -> Self {
        let entries = omegas
            .iter()
            .map(|a| omegas.iter().map(|b| a - b).collect())
            .collect();
        RelativeFrequencyMatrix { m: omegas.len(), entries }
    }

    pub fn from_entries(entries: Vec<Vec<f64>>) -> Self {
        RelativeFrequencyMatrix { m: entries.len(), entries }
    }
}

/// The Filippov set at a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPolytope {
    pub regime: Regime,
    pub partition: ClusterPartition,
    /// `Ωᵢ + (K/N) Σ_{j∉𝒞ᵢ} h(θⱼ − θᵢ)`.
    pub drift: Vec<f64>,
    /// `K / N`.
    pub coupling_over_n: f64,
}

impl FrequencyPolytope {
    /// Affine dimension: `0` off collisions or below the critical exponent,
    /// otherwise `N − κ`.
    pub fn dimension(&self) -> usize {
        match self.regime {
            Regime::Subcritical => 0,
            _ => self.partition.n() - self.partition.kappa(),
        }
    }

    /// A member obtained from one skew matrix per cluster (`Y` must have the
    /// cluster's size; its bound is ignored in the supercritical regime).
    pub fn point_from_skew(&self, ys: &[SkewMatrix]) -> Vec<f64> {
        let mut w = self.drift.clone();
        if self.regime == Regime::Subcritical {
            return w;
        }
        for (c, y) in self.partition.clusters.iter().zip(ys) {
            let r = y.row_sums();
            for (a, &i) in c.iter().enumerate() {
                w[i] += self.coupling_over_n * r[a];
            }
        }
        w
    }
}

/// Builds the Filippov set of the singular model at `state`; `partition` must
/// describe the collisions of `state`.
pub fn build_polytope(
    state: &PhaseState,
    omega_nat: &NaturalFrequencies,
    p: &ModelParams,
    partition: &ClusterPartition,
) -> Result<FrequencyPolytope, FilippovError> {
    let n = state.theta.len();
    if p.epsilon != 0.0 {
        return Err(FilippovError::Regularized(p.epsilon));
    }
    if omega_nat.len() != n {
        return Err(FilippovError::Length { expected: n, got: omega_nat.len() });
    }
    if !partition.is_valid_for(n) {
        return Err(FilippovError::BadPartition(n));
    }
    let labels = partition.labels();
    let kn = p.coupling_over_n();
    let drift = (0..n)
        .map(|i| {
            let pull: f64 = (0..n)
                .filter(|&j| labels[j] != labels[i])
                .map(|j| kernel_value(KernelKind::SingularH, state.theta[j] - state.theta[i], p))
                .sum();
            omega_nat.omega[i] + kn * pull
        })
        .collect();
    Ok(FrequencyPolytope { regime: p.regime(), partition: partition.clone(), drift, coupling_over_n: kn })
}

/// Largest violation of the H-representation by `omega` (`0` for members).
pub fn membership_residual(poly: &FrequencyPolytope, omega: &[f64]) -> f64 {
    let x: Vec<f64> = omega.iter().zip(&poly.drift).map(|(w, d)| w - d).collect();
    let mut worst = 0.0f64;
    for c in &poly.partition.clusters {
        let xs: Vec<f64> = c.iter().map(|&i| x[i]).collect();
        let v = match poly.regime {
            Regime::Subcritical => xs.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            Regime::Supercritical => (xs.iter().sum::<f64>() / xs.len() as f64).abs(),
            Regime::Critical => critical_violation(&xs, poly.coupling_over_n),
        };
        worst = worst.max(v);
    }
    worst
}

/// Half-space membership test with absolute tolerance `tol` on the
/// per-subset means.
pub fn membership(poly: &FrequencyPolytope, omega: &[f64], tol: f64) -> bool {
    omega.len() == poly.drift.len() && membership_residual(poly, omega) <= tol
}

/// `max_m max(mean of the m largest − kn(n−m), −kn(n−m) − mean of the m smallest)`
/// clipped at zero.
fn critical_violation(xs: &[f64], kn: f64) -> f64 {
    let n = xs.len();
    let mut s = xs.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut worst = 0.0f64;
    let (mut top, mut bottom) = (0.0, 0.0);
    for m in 1..=n {
        top += s[m - 1];
        bottom += s[n - m];
        let bound = kn * (n - m) as f64;
        worst = worst.max(top / m as f64 - bound).max(-bound - bottom / m as f64);
    }
    worst
}

/// Two oscillators sharing a phase stick iff their natural frequencies agree.
pub fn sticking_subcritical(cluster_omegas: &[f64], tol: f64) -> bool {
    let hi = cluster_omegas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = cluster_omegas.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo <= tol
}

/// Certificate of a failed critical sticking test: the subset (indices into
/// the cluster) whose mean deviates too far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StickingCertificate {
    pub m: usize,
    pub subset: Vec<usize>,
    pub deviation: f64,
    pub bound: f64,
}

/// Whole-cluster sticking test of the critical regime:
/// `|mean_I Ω − mean Ω| ≤ (K/N)(n_k − m)` for every subset `I` of size `m`.
pub fn sticking_critical(cluster_omegas: &[f64], coupling_k: f64, n_total: usize) -> bool {
    sticking_critical_certificate(cluster_omegas, coupling_k, n_total).is_none()
}

pub fn sticking_critical_certificate(
    cluster_omegas: &[f64],
    coupling_k: f64,
    n_total: usize,
) -> Option<StickingCertificate> {
    let n = cluster_omegas.len();
    if n == 0 {
        return None;
    }
    let kn = coupling_k / n_total as f64;
    let mean = cluster_omegas.iter().sum::<f64>() / n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cluster_omegas[b].total_cmp(&cluster_omegas[a]));
    let (mut top, mut bottom) = (0.0, 0.0);
    for m in 1..n {
        top += cluster_omegas[order[m - 1]] - mean;
        bottom += cluster_omegas[order[n - m]] - mean;
        let bound = kn * (n - m) as f64;
        let (dt, db) = (top / m as f64, bottom / m as f64);
        if dt > bound + PREDICATE_TOL {
            return Some(StickingCertificate { m, subset: order[..m].to_vec(), deviation: dt, bound });
        }
        if -db > bound + PREDICATE_TOL {
            let mut subset = order[n - m..].to_vec();
            subset.sort_unstable();
            return Some(StickingCertificate { m, subset, deviation: db, bound });
        }
    }
    None
}

fn triangle_defect(m: &RelativeFrequencyMatrix) -> f64 {
    let n = m.m;
    let e = &m.entries;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                worst = worst.max((e[i][j] + e[j][k] + e[k][i]).abs());
            }
        }
    }
    worst
}

fn tri_tol(m: &RelativeFrequencyMatrix) -> f64 {
    let scale = m.entries.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
    PREDICATE_TOL * scale
}

/// Triangle identity `m_ij + m_jk + m_ki = 0` over all triples; always true
/// for matrices of natural-frequency differences.
pub fn sticking_supercritical(m: &RelativeFrequencyMatrix) -> bool {
    triangle_defect(m) <= tri_tol(m)
}

/// Decides whether `M = (K/N)(Y·J + J·Y)` for some skew `Y`, unbounded or with
/// entries in `[-1, 1]`.
pub fn sticking_general_check(
    m: &RelativeFrequencyMatrix,
    coupling_k: f64,
    n_total: usize,
    bounded: bool,
) -> bool {
    let scale = n_total as f64 / coupling_k;
    let scaled = RelativeFrequencyMatrix::from_entries(
        m.entries.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect(),
    );
    if !sticking_supercritical(&scaled) {
        return false;
    }
    if !bounded || m.m < 2 {
        return true;
    }
    let n = m.m;
    // triangle identity ⇒ m_ij = λᵢ − λⱼ with λᵢ = m_{i1}
    let mut lambda: Vec<f64> = (0..n).map(|i| scaled.entries[i][0]).collect();
    lambda.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = lambda.iter().sum();
    let nf = n as f64;
    let (mut top, mut bottom) = (0.0, 0.0);
    for k in 1..n {
        top += lambda[k - 1];
        bottom += lambda[n - k];
        let kf = k as f64;
        // Σ_{i∈I, j∉I} (λᵢ − λⱼ) = n Σ_I λ − k Σ λ
        let bound = nf * kf * (nf - kf);
        let tol = PREDICATE_TOL * nf * nf * (1.0 + kf);
        if (nf * top - kf * total) > bound + tol || (nf * bottom - kf * total) < -bound - tol {
            return false;
        }
    }
    true
}

/// Canonical `Y` with `Y·j = x`, `Y_ij = (xᵢ − xⱼ)/n`.
pub fn construct_skew_balanced(x: &[f64]) -> Result<SkewMatrix, FilippovError> {
    let n = x.len();
    let sum: f64 = x.iter().sum();
    let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if sum.abs() > 1e-12 * scale {
        return Err(FilippovError::Unbalanced { sum });
    }
    let mut y = SkewMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            y.set(i, j, (x[i] - x[j]) / n as f64);
        }
    }
    Ok(y)
}

/// Checks the prefix conditions for `Y ∈ Skew_n([-1,1])` with `Y·j = x`.
/// Returns the first violated prefix otherwise.
pub fn bounded_skew_feasible(x: &[f64]) -> Result<(), FilippovError> {
    let n = x.len();
    let sum: f64 = x.iter().sum();
    let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if sum.abs() > 1e-12 * scale * n.max(1) as f64 {
        return Err(FilippovError::Unbalanced { sum });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]));
    let (mut top, mut bottom) = (0.0, 0.0);
    for m in 1..n {
        top += x[order[m - 1]];
        bottom += x[order[n - m]];
        let bound = (m * (n - m)) as f64;
        if top > bound + PREDICATE_TOL {
            return Err(FilippovError::Infeasible { m, indices: order[..m].to_vec(), sum: top, bound });
        }
        if bottom < -bound - PREDICATE_TOL {
            return Err(FilippovError::Infeasible { m, indices: order[n - m..].to_vec(), sum: bottom, bound });
        }
    }
    Ok(())
}

/// Witness `Y ∈ Skew_n([-1,1])` with `Y·j = x`. `Ok(None)` means feasible but
/// no witness was searched (`n > 12` and the canonical candidate exceeds the
/// bound).
pub fn construct_skew_bounded(x: &[f64]) -> Result<Option<SkewMatrix>, FilippovError> {
    bounded_skew_feasible(x)?;
    let n = x.len();
    let mut y = construct_skew_balanced(x)?;
    if y.max_abs() <= 1.0 {
        y.bound = Some(1.0);
        return Ok(Some(y));
    }
    if n > WITNESS_MAX_N {
        return Ok(None);
    }
    let mut y = max_flow_witness(x);
    y.bound = Some(1.0);
    Ok(Some(y))
}

/// Net flows of a maximum flow on the complete digraph with unit arc
/// capacities, fed by the positive entries of `x` and drained by the negative
/// ones. The cut conditions checked in [`bounded_skew_feasible`] are exactly
/// the max-flow/min-cut conditions for saturating every terminal arc.
fn max_flow_witness(x: &[f64]) -> SkewMatrix {
    let n = x.len();
    let (src, snk) = (n, n + 1);
    let size = n + 2;
    let mut cap = vec![vec![0.0f64; size]; size];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                cap[i][j] = 1.0;
            }
        }
        if x[i] > 0.0 {
            cap[src][i] = x[i];
        } else if x[i] < 0.0 {
            cap[i][snk] = -x[i];
        }
    }
    let orig = cap.clone();
    const EPS: f64 = 1e-15;
    loop {
        // Edmonds–Karp: shortest augmenting path by BFS
        let mut prev = vec![usize::MAX; size];
        prev[src] = src;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            if u == snk {
                break;
            }
            for v in 0..size {
                if prev[v] == usize::MAX && cap[u][v] > EPS {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[snk] == usize::MAX {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = snk;
        while v != src {
            let u = prev[v];
            push = push.min(cap[u][v]);
            v = u;
        }
        let mut v = snk;
        while v != src {
            let u = prev[v];
            cap[u][v] -= push;
            cap[v][u] += push;
            v = u;
        }
    }
    let mut y = SkewMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            // antiparallel arcs share one residual pair, so this is already the net flow i→j
            y.set(i, j, (orig[i][j] - cap[i][j]).clamp(-1.0, 1.0));
        }
    }
    polish(&mut y, x);
    y
}

/// Removes round-off residual from `Y·j = x` where the bound allows it.
fn polish(y: &mut SkewMatrix, x: &[f64]) {
    let n = y.n;
    let r: Vec<f64> = y.row_sums().iter().zip(x).map(|(s, t)| t - s).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = y.get(i, j) + (r[i] - r[j]) / n as f64;
            if v.abs() <= 1.0 {
                y.set(i, j, v);
            }
        }
    }
}
