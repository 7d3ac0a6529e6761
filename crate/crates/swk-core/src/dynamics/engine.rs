//! Event-driven integration over cluster phases.
//!
//! Collisions between clusters are detected when their orthodromic gap enters
//! the collision band `[0, collision_tol]`, localized by bisection on the step
//! length, and resolved by merging (sticking), a pass-through, or a one-sided
//! crossing jump.

use std::collections::HashSet;
use std::f64::consts::PI;

use super::stepper::{self, System, Trial};
use super::{DynamicsError, IntegratorConfig, Method, Reduced};
use crate::filippov::{sticking_critical, sticking_subcritical, sticking_supercritical, RelativeFrequencyMatrix};
use crate::kernel::{wrap, KernelKind, ModelParams, Regime};
use crate::quad;
use crate::state::{ClusterPartition, EventKind, EventRecord, NaturalFrequencies, PhaseState, Trajectory};

const TWO_PI: f64 = 2.0 * PI;

/// Final approach of two merged clusters, modelled by the scalar gap equation
/// `ġ = −(c h(g) − drift)` so that samples between the tolerance crossing and
/// the actual contact stay faithful.
#[derive(Debug, Clone)]
struct Pending {
    a: Vec<usize>,
    b: Vec<usize>,
    wa: f64,
    wb: f64,
    sign: f64,
    d0: f64,
    t_contact: f64,
    c: f64,
    drift: f64,
    alpha: f64,
}

impl Pending {
    fn speed(&self, th: f64) -> f64 {
        self.c * th.sin() / th.powf(2.0 * self.alpha) - self.drift
    }

    /// Time for the gap to close from `d`, `∫₀^d dθ / speed(θ)`, computed
    /// after the substitution `θ = d v^{1/(2α)}` that removes the endpoint
    /// singularity.
    fn tau(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return 0.0;
        }
        let q = 1.0 / (2.0 * self.alpha);
        let guess = d.powf(2.0 * self.alpha) / (2.0 * self.alpha * self.c);
        quad::integrate(|v| d * q * v.powf(q - 1.0) / self.speed(d * v.powf(q)), 0.0, 1.0, 1e-13 * guess.max(1e-300))
    }

    fn gap(&self, t: f64) -> f64 {
        let rem = self.t_contact - t;
        if rem <= 0.0 {
            return 0.0;
        }
        quad::bisect(|d| self.tau(d) - rem, 0.0, self.d0, 1e-16 * self.d0).unwrap_or(self.d0)
    }
}

pub(crate) struct Engine<'a> {
    kind: KernelKind,
    p: &'a ModelParams,
    omega: &'a NaturalFrequencies,
    cfg: &'a IntegratorConfig,
    singular: bool,
    partition: ClusterPartition,
    phase: Vec<f64>,
    offset: Vec<f64>,
    pending: Vec<Pending>,
    disarmed: HashSet<(usize, usize)>,
    events: Vec<EventRecord>,
    samples: Vec<PhaseState>,
    t: f64,
    steps: usize,
}

/// Colliding pair of cluster indices with the side it approached from.
#[derive(Debug, Clone, Copy)]
struct Hit {
    a: usize,
    b: usize,
    side: f64,
}

fn ulp(x: f64) -> f64 {
    let x = x.abs().max(1.0);
    f64::from_bits(x.to_bits() + 1) - x
}

impl<'a> Engine<'a> {
    pub fn new(
        kind: KernelKind,
        init: &PhaseState,
        omega: &'a NaturalFrequencies,
        p: &'a ModelParams,
        cfg: &'a IntegratorConfig,
    ) -> Self {
        let n = init.theta.len();
        Engine {
            kind,
            p,
            omega,
            cfg,
            singular: kind == KernelKind::SingularH,
            partition: ClusterPartition::singletons(n),
            phase: init.theta.clone(),
            offset: vec![0.0; n],
            pending: Vec::new(),
            disarmed: HashSet::new(),
            events: Vec::new(),
            samples: Vec::new(),
            t: init.t,
            steps: 0,
        }
    }

    fn system(&self) -> Reduced<'a> {
        let sys = Reduced::new(self.kind, self.p, &self.partition, &self.omega.omega);
        if self.singular && self.p.regime() == Regime::Subcritical {
            sys.with_band(self.cfg.collision_tol)
        } else {
            sys
        }
    }

    /// One trial step and the order of the scheme that took it. Explicit
    /// steps beyond the stability limit fall back to the Rosenbrock scheme:
    /// nearly locked pairs with `α < 1/2` make the field extremely stiff.
    fn trial(&self, sys: &Reduced, y: &[f64], h: f64) -> (Trial, f64) {
        let (rel, abs) = (self.cfg.rel_tol, self.cfg.abs_tol);
        match self.cfg.method {
            Method::Rk45 if h * stepper::gershgorin(&sys.jacobian(y)) <= stepper::DOPRI_STABILITY => {
                (stepper::dopri5(sys, y, h, rel, abs), 5.0)
            }
            _ => (stepper::ros2(sys, y, h, rel, abs), 2.0),
        }
    }

    fn key(&self, a: usize, b: usize) -> (usize, usize) {
        let (ra, rb) = (self.partition.clusters[a][0], self.partition.clusters[b][0]);
        (ra.min(rb), ra.max(rb))
    }

    /// Oscillator phases at the current time.
    fn thetas(&self) -> Vec<f64> {
        let labels = self.partition.labels();
        let mut th: Vec<f64> = (0..labels.len()).map(|i| self.phase[labels[i]] + self.offset[i]).collect();
        for pd in &self.pending {
            let g = pd.sign * pd.gap(self.t);
            for &i in &pd.a {
                th[i] -= pd.wa * g;
            }
            for &i in &pd.b {
                th[i] += pd.wb * g;
            }
        }
        th
    }

    fn freqs(&self) -> Vec<f64> {
        let sys = self.system();
        let mut f = vec![0.0; self.phase.len()];
        sys.rhs(&self.phase, &mut f);
        let labels = self.partition.labels();
        let mut w: Vec<f64> = labels.iter().map(|&k| f[k]).collect();
        for pd in &self.pending {
            let g = pd.gap(self.t);
            if g <= 0.0 {
                continue;
            }
            let s = pd.sign * pd.speed(g);
            for &i in &pd.a {
                w[i] += pd.wa * s;
            }
            for &i in &pd.b {
                w[i] -= pd.wb * s;
            }
        }
        w
    }

    fn record(&mut self) {
        self.pending.retain(|pd| pd.t_contact > self.t);
        let s = PhaseState { t: self.t, theta: self.thetas(), freq: Some(self.freqs()) };
        match self.samples.last() {
            Some(last) if last.t >= self.t => {
                *self.samples.last_mut().unwrap() = s;
            }
            _ => self.samples.push(s),
        }
    }

    fn in_band(&self, d0: f64, d1: f64) -> bool {
        let tol = self.cfg.collision_tol;
        let (lo, hi) = (d0.min(d1), d0.max(d1));
        ((lo - tol) / TWO_PI).ceil() <= ((hi + tol) / TWO_PI).floor()
    }

    /// Armed cluster pairs whose gap touches the band along `y0 → y1`.
    fn hits(&self, y0: &[f64], y1: &[f64]) -> Vec<Hit> {
        let mut out = Vec::new();
        for a in 0..y0.len() {
            for b in (a + 1)..y0.len() {
                if self.disarmed.contains(&self.key(a, b)) {
                    continue;
                }
                let (d0, d1) = (y0[b] - y0[a], y1[b] - y1[a]);
                if self.in_band(d0, d1) {
                    out.push(Hit { a, b, side: sign(wrap(d0)) });
                }
            }
        }
        out
    }

    /// Re-arms crossed pairs once they are well clear of the band. The margin
    /// is hysteresis: a pair locking at a gap near `collision_tol` would
    /// otherwise flicker in and out of the band forever.
    fn rearm(&mut self) {
        if self.disarmed.is_empty() {
            return;
        }
        let tol = 10.0 * self.cfg.collision_tol;
        let reps: Vec<usize> = self.partition.representatives();
        let mut keep = HashSet::new();
        for &(ra, rb) in &self.disarmed {
            let (Some(a), Some(b)) = (reps.iter().position(|&r| r == ra), reps.iter().position(|&r| r == rb)) else {
                continue;
            };
            if wrap(self.phase[b] - self.phase[a]).abs() <= tol {
                keep.insert((ra, rb));
            }
        }
        self.disarmed = keep;
    }

    /// Largest admissible step and the armed pair that limits it. Closing
    /// pairs may advance only a `dt_safety` fraction of their gap per step:
    /// near a finite-time collision the field is not Lipschitz, and explicit
    /// stages that overshoot the contact point can pin the gap at a spurious
    /// fixed point. The supercritical field additionally caps steps by the
    /// collision time scale of the closest pair.
    fn step_cap(&self) -> (f64, Option<(usize, usize, f64)>) {
        let n = self.phase.len();
        if !self.singular || n < 2 {
            return (f64::INFINITY, None);
        }
        let mut cap = f64::INFINITY;
        let mut limiting = None;
        if self.p.regime() == Regime::Supercritical {
            let mut best = (0, 1, f64::INFINITY);
            for a in 0..n {
                for b in (a + 1)..n {
                    let d = wrap(self.phase[b] - self.phase[a]).abs();
                    if d < best.2 {
                        best = (a, b, d);
                    }
                }
            }
            cap = self.cfg.dt_safety * best.2.powf(2.0 * self.p.alpha) / (self.p.coupling_k * self.p.n_osc as f64);
            limiting = Some(best);
        }
        let mut f = vec![0.0; n];
        self.system().rhs(&self.phase, &mut f);
        for a in 0..n {
            for b in (a + 1)..n {
                let g = wrap(self.phase[b] - self.phase[a]);
                let v = f[b] - f[a];
                if g * v >= 0.0 || self.disarmed.contains(&self.key(a, b)) {
                    continue;
                }
                let c = self.cfg.dt_safety * g.abs() / v.abs();
                if c < cap {
                    cap = c;
                    limiting = Some((a, b, g.abs()));
                }
            }
        }
        (cap, limiting)
    }

    pub fn run(mut self) -> Result<Trajectory, DynamicsError> {
        let t0 = self.t;
        let t_end = t0 + self.cfg.t_end;
        if self.singular {
            let y = self.phase.clone();
            let initial = self.hits(&y, &y);
            if !initial.is_empty() {
                self.handle(initial)?;
            }
        }
        self.record();
        let grid = |k: usize| (t0 + k as f64 * self.cfg.sample_dt).min(t_end);
        let mut k_next = 1usize;
        let mut h = self.cfg.dt_max.min(self.cfg.sample_dt).min(1e-3).max(self.cfg.dt_min);
        while self.t < t_end {
            while grid(k_next) <= self.t && grid(k_next) < t_end {
                k_next += 1;
            }
            let target = grid(k_next);
            self.steps += 1;
            if self.steps > self.cfg.max_steps {
                return Err(DynamicsError::TooManySteps(self.cfg.max_steps));
            }
            let (cap, limiting) = self.step_cap();
            if cap < 64.0 * ulp(self.t) {
                // the step cap has reached time resolution: resolve the
                // limiting pair now and let the contact model finish the gap
                let (a, b, _) = limiting.unwrap();
                let side = sign(wrap(self.phase[b] - self.phase[a]));
                self.handle(vec![Hit { a, b, side }])?;
                self.record();
                continue;
            }
            let hh = h.min(target - self.t).min(self.cfg.dt_max).min(cap);
            let sys = self.system();
            let (trial, order) = self.trial(&sys, &self.phase, hh);
            let finite = trial.y.iter().all(|v| v.is_finite()) && trial.err.is_finite();
            if !finite || trial.err > 1.0 {
                let fac = if finite { (0.9 * trial.err.powf(-1.0 / order)).clamp(0.1, 0.9) } else { 0.25 };
                h = hh * fac;
                if h < self.cfg.dt_min.max(4.0 * ulp(self.t)) {
                    if !finite {
                        return Err(DynamicsError::NonFinite { t: self.t });
                    }
                    return Err(DynamicsError::StepUnderflow { t: self.t, h, neighborhood: self.thetas() });
                }
                continue;
            }
            if self.singular {
                let hits = self.hits(&self.phase, &trial.y);
                if !hits.is_empty() {
                    let (tau, y_ev, hits) = self.localize(&sys, hh, hits);
                    self.t += tau;
                    self.phase = y_ev;
                    self.rearm();
                    self.handle(hits)?;
                    self.record();
                    continue;
                }
            }
            self.t = if hh == target - self.t { target } else { self.t + hh };
            self.phase = trial.y;
            self.rearm();
            if self.t >= target {
                self.t = target;
                self.record();
                k_next += 1;
            }
            let grow = if trial.err == 0.0 { 5.0 } else { (0.9 * trial.err.powf(-1.0 / order)).clamp(0.2, 5.0) };
            h = if hh < h { h.max(hh * grow) } else { hh * grow };
        }
        Ok(Trajectory {
            samples: self.samples,
            events: self.events,
            params: self.p.clone(),
            omega_nat: self.omega.clone(),
        })
    }

    /// Shortest step length after which some armed pair touches the band.
    fn localize(&self, sys: &Reduced, h: f64, fallback: Vec<Hit>) -> (f64, Vec<f64>, Vec<Hit>) {
        let (mut lo, mut hi) = (0.0, h);
        let mut best = (self.trial(sys, &self.phase, h).0.y, fallback);
        while hi - lo > self.cfg.event_bisection_tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let y = self.trial(sys, &self.phase, mid).0.y;
            let hits = self.hits(&self.phase, &y);
            if hits.is_empty() {
                lo = mid;
            } else {
                hi = mid;
                best = (y, hits);
            }
        }
        (hi, best.0, best.1)
    }

    fn handle(&mut self, hits: Vec<Hit>) -> Result<(), DynamicsError> {
        let tol = self.cfg.collision_tol;
        let kappa = self.phase.len();
        // group clusters joined by triggering pairs or by armed pairs in the band
        let mut parent: Vec<usize> = (0..kappa).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            p[i] = r;
            r
        }
        let mut sides = std::collections::HashMap::new();
        for h in &hits {
            sides.insert((h.a, h.b), h.side);
            let (ra, rb) = (find(&mut parent, h.a), find(&mut parent, h.b));
            parent[ra.max(rb)] = ra.min(rb);
        }
        for a in 0..kappa {
            for b in (a + 1)..kappa {
                if !self.disarmed.contains(&self.key(a, b)) && wrap(self.phase[b] - self.phase[a]).abs() <= tol {
                    sides.entry((a, b)).or_insert_with(|| sign(wrap(self.phase[b] - self.phase[a])));
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); kappa];
        for k in 0..kappa {
            let r = find(&mut parent, k);
            groups[r].push(k);
        }
        groups.retain(|g| g.len() >= 2);

        let regime = self.p.regime();
        let mut merges: Vec<Vec<usize>> = Vec::new();
        let mut crossings: Vec<(usize, usize, f64)> = Vec::new();
        for g in &groups {
            let members = self.members(g);
            let omegas: Vec<f64> = members.iter().map(|&i| self.omega.omega[i]).collect();
            let sticky = match regime {
                Regime::Subcritical => sticking_subcritical(&omegas, self.cfg.merge_tol),
                Regime::Critical => sticking_critical(&omegas, self.p.coupling_k, self.p.n_osc),
                Regime::Supercritical => {
                    debug_assert!(sticking_supercritical(&RelativeFrequencyMatrix::from_omegas(&omegas)));
                    true
                }
            };
            self.push_event(EventKind::Collision, members.clone(), self.partition.clone(), None, None)?;
            if sticky {
                merges.push(g.clone());
                continue;
            }
            match regime {
                Regime::Subcritical => {
                    for (x, &a) in g.iter().enumerate() {
                        for &b in &g[x + 1..] {
                            let key = self.key(a, b);
                            self.disarmed.insert(key);
                        }
                    }
                    self.push_event(EventKind::Crossing, members, self.partition.clone(), None, None)?;
                }
                _ => {
                    let side = if g.len() == 2 { sides.get(&(g[0], g[1])).copied() } else { None };
                    match side {
                        Some(s) if self.crossing_speed(g[0], g[1], s).is_some() => crossings.push((g[0], g[1], s)),
                        _ => {
                            self.push_event(EventKind::SplitRejected, members, self.partition.clone(), None, None)?;
                            merges.push(g.clone());
                        }
                    }
                }
            }
        }
        if !crossings.is_empty() {
            self.cross(&crossings)?;
        }
        if !merges.is_empty() {
            self.merge(&merges)?;
        }
        Ok(())
    }

    fn members(&self, group: &[usize]) -> Vec<usize> {
        let mut m: Vec<usize> = group.iter().flat_map(|&k| self.partition.clusters[k].iter().copied()).collect();
        m.sort_unstable();
        m
    }

    fn push_event(
        &mut self,
        kind: EventKind,
        indices: Vec<usize>,
        partition_after: ClusterPartition,
        t_contact: Option<f64>,
        merged_phase: Option<f64>,
    ) -> Result<(), DynamicsError> {
        if self.events.len() >= self.cfg.max_events {
            return Err(DynamicsError::TooManyEvents(self.cfg.max_events));
        }
        self.events.push(EventRecord { t_event: self.t, kind, indices, partition_after, t_contact, merged_phase });
        let window = self.cfg.event_bisection_tol;
        let count = self.events.iter().rev().take_while(|e| e.t_event >= self.t - window).count();
        if count > self.cfg.zeno_limit {
            return Err(DynamicsError::Zeno { t: self.t, count, window });
        }
        Ok(())
    }

    /// Vector field with cluster `b` placed `2·tol` past cluster `a` on the
    /// side opposite to `side`; returns it when `b` keeps moving that way.
    fn crossing_speed(&self, a: usize, b: usize, side: f64) -> Option<(Vec<f64>, f64)> {
        let tol = self.cfg.collision_tol;
        let mut y = self.phase.clone();
        let lift = self.phase[b] - self.phase[a] - wrap(self.phase[b] - self.phase[a]);
        y[b] = y[a] - side * 2.0 * tol + lift;
        let sys = self.system();
        let mut f = vec![0.0; y.len()];
        sys.rhs(&y, &mut f);
        let v = f[b] - f[a];
        if v * side < 0.0 {
            Some((f, v))
        } else {
            None
        }
    }

    /// Moves each crossing pair to the far side of the band using the
    /// one-sided vector field of that side.
    fn cross(&mut self, crossings: &[(usize, usize, f64)]) -> Result<(), DynamicsError> {
        let tol = self.cfg.collision_tol;
        let mut dt = 0.0f64;
        let mut field = None;
        for &(a, b, side) in crossings {
            let (f, v) = self.crossing_speed(a, b, side).expect("checked before");
            let g = wrap(self.phase[b] - self.phase[a]);
            dt = dt.max((side * g + 2.0 * tol).max(0.0) / v.abs());
            field = Some(f);
        }
        let f = field.unwrap();
        let old = self.phase.clone();
        for k in 0..self.phase.len() {
            self.phase[k] += dt * f[k];
        }
        for &(a, b, side) in crossings {
            let lift = old[b] - old[a] - wrap(old[b] - old[a]);
            self.phase[b] = self.phase[a] - side * 2.0 * tol + lift;
        }
        self.t += dt;
        for &(a, b, _) in crossings {
            let members = self.members(&[a, b]);
            self.push_event(EventKind::Crossing, members, self.partition.clone(), None, None)?;
        }
        Ok(())
    }

    fn merge(&mut self, groups: &[Vec<usize>]) -> Result<(), DynamicsError> {
        let kn = self.p.coupling_over_n();
        let omega_hat: Vec<f64> = self
            .partition
            .clusters
            .iter()
            .map(|c| c.iter().map(|&i| self.omega.omega[i]).sum::<f64>() / c.len() as f64)
            .collect();
        let mut consumed = vec![false; self.phase.len()];
        let mut out: Vec<(Vec<usize>, f64)> = Vec::new();
        let mut contacts = Vec::new();
        for g in groups {
            let base = self.phase[g[0]];
            let mut total = 0.0;
            let mut weighted = 0.0;
            let mut lifted = Vec::new();
            for &k in g {
                consumed[k] = true;
                let shift = TWO_PI * ((self.phase[k] - base) / TWO_PI).round();
                for &i in &self.partition.clusters[k] {
                    self.offset[i] += shift;
                }
                let phi = self.phase[k] - shift;
                let nk = self.partition.clusters[k].len() as f64;
                lifted.push(phi);
                total += nk;
                weighted += nk * phi;
            }
            let merged = weighted / total;
            let members = self.members(g);
            let mut t_contact = self.t;
            if g.len() == 2 {
                let (a, b) = (g[0], g[1]);
                let gap = lifted[1] - lifted[0];
                let (na, nb) = (self.partition.clusters[a].len() as f64, self.partition.clusters[b].len() as f64);
                let mut d_omega = omega_hat[b] - omega_hat[a];
                if d_omega.abs() <= self.cfg.merge_tol {
                    d_omega = 0.0;
                }
                let s = sign(gap);
                let pd = Pending {
                    a: self.partition.clusters[a].clone(),
                    b: self.partition.clusters[b].clone(),
                    wa: nb / (na + nb),
                    wb: na / (na + nb),
                    sign: s,
                    d0: gap.abs(),
                    t_contact: self.t,
                    c: kn * (na + nb),
                    drift: s * d_omega,
                    alpha: self.p.alpha,
                };
                if pd.d0 > 0.0 && pd.speed(pd.d0) > 0.0 && pd.speed(pd.d0 * 1e-6) > 0.0 {
                    let tau = pd.tau(pd.d0);
                    if tau.is_finite() && tau > 0.0 {
                        t_contact = self.t + tau;
                        contacts.push(Pending { t_contact, ..pd });
                    }
                }
            }
            if let Some(ev) = self.events.iter_mut().rev().find(|e| e.kind == EventKind::Collision && e.indices == members) {
                ev.t_contact = Some(t_contact);
            }
            out.push((members, merged));
        }
        for k in 0..self.phase.len() {
            if !consumed[k] {
                out.push((self.partition.clusters[k].clone(), self.phase[k]));
            }
        }
        out.sort_by_key(|(m, _)| m[0]);
        let merged_phases: Vec<(Vec<usize>, f64)> =
            groups.iter().map(|g| self.members(g)).filter_map(|m| out.iter().find(|(c, _)| *c == m).cloned()).collect();
        self.disarmed.clear();
        self.partition = ClusterPartition::from_clusters(out.iter().map(|(c, _)| c.clone()).collect());
        self.phase = out.iter().map(|(_, p)| *p).collect();
        self.pending.extend(contacts);
        for (members, phase) in merged_phases {
            self.push_event(EventKind::Merge, members, self.partition.clone(), None, Some(phase))?;
        }
        Ok(())
    }
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}
