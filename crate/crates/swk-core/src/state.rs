//! Phase configurations, collision clusters and trajectory records.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{orthodromic_distance, ModelParams};

#[derive(Debug, Error)]
pub enum StateError {
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("expected {expected} entries, got {got}")]
    Length { expected: usize, got: usize },
    #[error("state has no frequencies")]
    NoFrequencies,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Time-stamped unwrapped phases, optionally with instantaneous frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub t: f64,
    pub theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq: Option<Vec<f64>>,
}

impl PhaseState {
    pub fn new(t: f64, theta: Vec<f64>) -> Self {
        PhaseState { t, theta, freq: None }
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self, n: usize) -> Result<(), StateError> {
        if self.theta.len() != n {
            return Err(StateError::Length { expected: n, got: self.theta.len() });
        }
        if let Some(i) = self.theta.iter().position(|x| !x.is_finite()) {
            return Err(StateError::NonFinite(i));
        }
        if let Some(f) = &self.freq {
            if f.len() != n {
                return Err(StateError::Length { expected: n, got: f.len() });
            }
        }
        Ok(())
    }

    /// `n` phases drawn uniformly from `[0, d0]`, then shifted so that their
    /// extreme values are exactly `0` and `d0`.
    pub fn confined(n: usize, d0: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        if n >= 2 {
            let lo = theta.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for x in &mut theta {
                *x = (*x - lo) / (hi - lo) * d0;
            }
        } else {
            theta.iter_mut().for_each(|x| *x = 0.0);
        }
        PhaseState::new(0.0, theta)
    }
}

/// Natural frequencies Ωᵢ with the derived norm `C_Ω = (Σ Ωᵢ²)^{1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalFrequencies {
    pub omega: Vec<f64>,
    pub c_omega: f64,
}

impl NaturalFrequencies {
    pub fn new(omega: Vec<f64>) -> Self {
        let c_omega = omega.iter().map(|x| x * x).sum::<f64>().sqrt();
        NaturalFrequencies { omega, c_omega }
    }

    pub fn identical(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    /// Subtracts the mean so that the frequencies average to zero.
    pub fn canonicalized(&self) -> Self {
        let m = self.mean();
        Self::new(self.omega.iter().map(|x| x - m).collect())
    }

    /// Uniform draws on `[-width/2, width/2]`, recentred to zero mean.
    pub fn uniform_zero_mean(n: usize, width: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() - 0.5) * width).collect();
        Self::new(raw).canonicalized()
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.omega.is_empty() {
            0.0
        } else {
            self.omega.iter().sum::<f64>() / self.omega.len() as f64
        }
    }
}

/// Partition of oscillator indices (0-based) into collision clusters, ordered
/// by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusterPartition {
    pub clusters: Vec<Vec<usize>>,
}

impl ClusterPartition {
    pub fn singletons(n: usize) -> Self {
        ClusterPartition { clusters: (0..n).map(|i| vec![i]).collect() }
    }

    /// Sorts members and clusters into canonical order.
    pub fn from_clusters(mut clusters: Vec<Vec<usize>>) -> Self {
        clusters.retain(|c| !c.is_empty());
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.sort_by_key(|c| c[0]);
        ClusterPartition { clusters }
    }

    pub fn kappa(&self) -> usize {
        self.clusters.len()
    }

    pub fn n(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    pub fn representatives(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c[0]).collect()
    }

    /// `labels[i]` is the cluster index of oscillator `i`.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n()];
        for (k, c) in self.clusters.iter().enumerate() {
            for &i in c {
                labels[i] = k;
            }
        }
        labels
    }

    pub fn is_valid_for(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for c in &self.clusters {
            for &i in c {
                if i >= n || seen[i] {
                    return false;
                }
                seen[i] = true;
            }
        }
        seen.into_iter().all(|s| s) && self.representatives().windows(2).all(|w| w[0] < w[1])
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut j = i;
        while self.0[j] != r {
            let next = self.0[j];
            self.0[j] = r;
            j = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Clusters of `phases` under the transitive closure of "orthodromic distance
/// at most `tol`".
pub fn cluster_phases(phases: &[f64], tol: f64) -> ClusterPartition {
    let n = phases.len();
    let mut uf = UnionFind((0..n).collect());
    for i in 0..n {
        for j in (i + 1)..n {
            if orthodromic_distance(phases[j] - phases[i]).unwrap_or(f64::INFINITY) <= tol {
                uf.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = uf.find(i);
        groups[r].push(i);
    }
    ClusterPartition::from_clusters(groups)
}

pub fn detect_partition(state: &PhaseState, tol: f64) -> ClusterPartition {
    cluster_phases(&state.theta, tol)
}

fn spread(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// `D(Θ) = max θᵢ − min θᵢ` on unwrapped phases.
pub fn phase_diameter(state: &PhaseState) -> f64 {
    spread(&state.theta)
}

/// `D(Θ̇) = max θ̇ᵢ − min θ̇ᵢ`.
pub fn freq_diameter(state: &PhaseState) -> Result<f64, StateError> {
    state.freq.as_deref().map(spread).ok_or(StateError::NoFrequencies)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Collision,
    Merge,
    Crossing,
    SplitRejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t_event: f64,
    pub kind: EventKind,
    pub indices: Vec<usize>,
    pub partition_after: ClusterPartition,
    /// For collisions: extrapolated instant at which the gap actually closes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_contact: Option<f64>,
    /// For merges: the phase assigned to the merged cluster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merged_phase: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<PhaseState>,
    pub events: Vec<EventRecord>,
    pub params: ModelParams,
    pub omega_nat: NaturalFrequencies,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&PhaseState> {
        self.samples.last()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &EventRecord> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Partition in force at time `t` (after all events at or before `t`).
    pub fn partition_at(&self, t: f64) -> ClusterPartition {
        self.events
            .iter()
            .filter(|e| e.t_event <= t)
            .last()
            .map(|e| e.partition_after.clone())
            .unwrap_or_else(|| ClusterPartition::singletons(self.omega_nat.len()))
    }

    /// CSV with header `t,theta_1..theta_N[,freq_1..freq_N]`; `#` comment
    /// lines carry the version and resolved configuration.
    pub fn write_csv<W: Write>(&self, mut w: W, preamble: &[String]) -> Result<(), StateError> {
        for line in preamble {
            writeln!(w, "# {line}")?;
        }
        let n = self.omega_nat.len();
        let with_freq = self.samples.iter().all(|s| s.freq.is_some());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("theta_{i}")));
        if with_freq {
            header.extend((1..=n).map(|i| format!("freq_{i}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![fmt_num(s.t)];
            row.extend(s.theta.iter().map(|&x| fmt_num(x)));
            if with_freq {
                row.extend(s.freq.as_ref().unwrap().iter().map(|&x| fmt_num(x)));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn events_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.events).unwrap_or(serde_json::Value::Null)
    }
}

/// Fixed 17-significant-digit formatting for deterministic output.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}
