//! Acceptance criteria A1–A12. Prints one `A<n> PASS|FAIL` line per criterion
//! and exits non-zero when any fails. An optional argument filters by id
//! (`cargo test --test acceptance -- A7`).

mod common;

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swk_core::analysis::{
    check_identical_bounds, check_nonidentical_bounds, check_regular_bounds, check_two_oscillator_bounds,
    coupling_for_threshold_ratio, equilibrium_two, first_collision_time, linear_stability, perturbation_response,
    refine_equilibrium, theta_tilde, two_oscillator_bounds, RefineOptions,
};
use swk_core::dynamics::{epsilon_sweep, eta_sweep, integrate, integrate_kind};
use swk_core::filippov::{
    build_polytope, construct_skew_bounded, membership, sticking_critical, sticking_general_check,
    RelativeFrequencyMatrix,
};
use swk_core::state::phase_diameter;
use swk_core::{
    BoundReport, ClusterPartition, EventKind, IntegratorConfig, KernelKind, ModelParams, NaturalFrequencies,
    PhaseState, Slack, Trajectory, Verdict,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn all_hold(reports: &[BoundReport], ctx: &str) -> Result<(), String> {
    for r in reports {
        ensure(r.satisfied && r.hypotheses_hold, || {
            format!(
                "{ctx}: {} satisfied={} hypotheses={} margin={:.3e} at t={:.6}",
                r.bound_name, r.satisfied, r.hypotheses_hold, r.margin, r.worst_t
            )
        })?;
    }
    Ok(())
}

fn sing_h(theta: f64, alpha: f64) -> f64 {
    let x = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if x == 0.0 {
        0.0
    } else {
        x.sin() / x.abs().powf(2.0 * alpha)
    }
}

fn cfg(t_end: f64, sample_dt: f64) -> IntegratorConfig {
    IntegratorConfig::default().with_t_end(t_end).with_sample_dt(sample_dt)
}

fn a1() -> Outcome {
    let mut worst_rel = 0.0f64;
    let mut slowest = Duration::ZERO;
    for &alpha in &[0.1, 0.25, 0.4] {
        for &theta0 in &[0.5, 1.0, 2.0] {
            let p = ModelParams::new(alpha, 1.0, 2);
            let b = two_oscillator_bounds(theta0, &p).map_err(|e| e.to_string())?;
            let start = Instant::now();
            let traj = integrate(
                &PhaseState::new(0.0, vec![0.0, theta0]),
                &NaturalFrequencies::identical(2),
                &p,
                &cfg(1.2 * b.t_max, 1e-2),
            )
            .map_err(|e| e.to_string())?;
            let took = start.elapsed();
            slowest = slowest.max(took);
            let ctx = format!("alpha={alpha} theta0={theta0}");
            ensure(took < Duration::from_secs(1), || format!("{ctx}: runtime {took:?}"))?;
            let reports =
                check_two_oscillator_bounds(&traj, &p, 1e-4, Slack::new(0.0, 1e-6)).map_err(|e| e.to_string())?;
            all_hold(&reports, &ctx)?;
            let tc = first_collision_time(&traj).ok_or(format!("{ctx}: no collision"))?;
            let exact = common::two_oscillator_collision_time(theta0, alpha, 1.0);
            worst_rel = worst_rel.max((tc - exact).abs() / exact);
            ensure((tc - exact).abs() <= 1e-4 * exact, || format!("{ctx}: collision at {tc}, quadrature {exact}"))?;
        }
    }
    Ok(format!("9 cases; collision time within {worst_rel:.1e} of quadrature; slowest {slowest:.2?}"))
}

fn identical_suite(alpha: f64, sizes: &[usize], t_end: f64, limit: Duration) -> Outcome {
    let mut notes = Vec::new();
    for &n in sizes {
        let p = ModelParams::new(alpha, 1.0, n);
        let init = PhaseState::confined(n, 1.0, 11 + n as u64);
        let start = Instant::now();
        let traj = integrate(&init, &NaturalFrequencies::identical(n), &p, &cfg(t_end, 1e-3)).map_err(|e| e.to_string())?;
        let took = start.elapsed();
        let ctx = format!("N={n}");
        ensure(took < limit, || format!("{ctx}: runtime {took:?}"))?;
        let reports = check_identical_bounds(&traj, &p, Slack::default(), 0.5).map_err(|e| e.to_string())?;
        all_hold(&reports, &ctx)?;
        ensure(reports.iter().any(|r| r.bound_name == "sync_time"), || format!("{ctx}: no sync-time report"))?;
        let kappa = traj.partition_at(t_end).kappa();
        ensure(kappa == 1, || format!("{ctx}: final kappa {kappa}"))?;
        let merge = traj
            .events_of(EventKind::Merge)
            .filter(|e| e.partition_after.kappa() == 1)
            .map(|e| e.t_event)
            .next()
            .unwrap_or(f64::NAN);
        notes.push(format!("N={n}: total merge at t={merge:.4} ({took:.2?})"));
    }
    Ok(notes.join("; "))
}

fn a2() -> Outcome {
    identical_suite(0.25, &[5, 20], 3.0, Duration::from_secs(5))
}

fn a3() -> Outcome {
    identical_suite(0.5, &[3, 8], 2.0, Duration::from_secs(60))
}

fn a4() -> Outcome {
    let p = ModelParams::new(0.5, 1.0, 2);
    let init = PhaseState::new(0.0, vec![0.0, 1.0]);

    let om = NaturalFrequencies::new(vec![0.4, -0.4]);
    let traj = integrate(&init, &om, &p, &cfg(4.0, 1e-2)).map_err(|e| e.to_string())?;
    let merge = traj.events_of(EventKind::Merge).next().ok_or("gap 0.8: no merge")?;
    ensure(traj.events_of(EventKind::Crossing).next().is_none(), || "gap 0.8: unexpected crossing".into())?;
    let after = merge.t_contact.unwrap_or(merge.t_event).max(merge.t_event);
    let mut worst = 0.0f64;
    let mut count = 0;
    for s in traj.samples.iter().filter(|s| s.t > after) {
        for f in s.freq.as_ref().unwrap() {
            worst = worst.max((f - om.mean()).abs());
        }
        count += 1;
    }
    ensure(count > 10 && worst <= 1e-8, || format!("gap 0.8: |freq − mean Ω| = {worst:.3e} over {count} samples"))?;

    let om = NaturalFrequencies::new(vec![1.0, -1.0]);
    let traj = integrate(&init, &om, &p, &cfg(2.0, 1e-2)).map_err(|e| e.to_string())?;
    let cross = traj.events_of(EventKind::Crossing).next().ok_or("gap 2.0: no crossing")?;
    ensure(traj.events_of(EventKind::Merge).next().is_none(), || "gap 2.0: unexpected merge".into())?;
    let before = traj.samples.iter().filter(|s| s.t < cross.t_event).all(|s| s.theta[1] - s.theta[0] > 0.0);
    let flipped = traj.samples.iter().filter(|s| s.t > cross.t_event + 1e-3).all(|s| s.theta[1] - s.theta[0] < 0.0);
    ensure(before && flipped, || "gap 2.0: relative phase did not change sign".into())?;
    Ok(format!("gap 0.8 merges at t={:.6} (freq error {worst:.1e}); gap 2.0 crosses at t={:.6}", merge.t_event, cross.t_event))
}

/// Post-merge cluster frequency against the member mean of Ω plus the pull of
/// the other clusters, recomputed from the sampled phases.
fn check_cluster_frequencies(traj: &Trajectory, alpha: f64, kn: f64) -> Result<f64, String> {
    let om = &traj.omega_nat.omega;
    let mut worst = 0.0f64;
    let merges: Vec<_> = traj.events_of(EventKind::Merge).collect();
    for (k, m) in merges.iter().enumerate() {
        let from = m.t_contact.unwrap_or(m.t_event).max(m.t_event);
        let until = traj.events.iter().map(|e| e.t_event).filter(|&t| t > m.t_event).fold(f64::INFINITY, f64::min);
        let until = if k + 1 < merges.len() { until.min(merges[k + 1].t_event) } else { until };
        let labels = m.partition_after.labels();
        for s in traj.samples.iter().filter(|s| s.t > from && s.t < until) {
            let f = s.freq.as_ref().unwrap();
            for c in &m.partition_after.clusters {
                let mean: f64 = c.iter().map(|&i| om[i]).sum::<f64>() / c.len() as f64;
                for &i in c {
                    let pull: f64 = (0..om.len())
                        .filter(|&j| labels[j] != labels[i])
                        .map(|j| sing_h(s.theta[j] - s.theta[i], alpha))
                        .sum();
                    worst = worst.max((f[i] - mean - kn * pull).abs());
                }
            }
        }
    }
    Ok(worst)
}

fn a5() -> Outcome {
    let alpha = 0.75;
    let mut notes = Vec::new();
    let cases = [
        (vec![1.0, 3.0], vec![0.0, 1.0], 10.0),
        (vec![-0.1, -0.03, 0.04, 0.09], PhaseState::confined(4, 1.0, 5).theta, 20.0),
    ];
    for (omega, theta, t_end) in cases {
        let n = omega.len();
        let p = ModelParams::new(alpha, 1.0, n);
        let om = NaturalFrequencies::new(omega);
        let traj = integrate(&PhaseState::new(0.0, theta), &om, &p, &cfg(t_end, 1e-2)).map_err(|e| e.to_string())?;
        let ctx = format!("N={n}");
        let collisions = traj.events_of(EventKind::Collision).count();
        let merges = traj.events_of(EventKind::Merge).count();
        ensure(collisions > 0 && collisions == merges, || format!("{ctx}: {collisions} collisions, {merges} merges"))?;
        ensure(traj.events_of(EventKind::Crossing).next().is_none(), || format!("{ctx}: crossing in supercritical run"))?;
        for w in traj.events.windows(2) {
            if w[0].kind == EventKind::Collision {
                ensure(w[1].kind == EventKind::Merge, || format!("{ctx}: collision at {} not followed by a merge", w[0].t_event))?;
            }
        }
        let worst = check_cluster_frequencies(&traj, alpha, p.coupling_over_n())?;
        ensure(worst <= 1e-8, || format!("{ctx}: post-merge frequency error {worst:.3e}"))?;
        let last = traj.final_state().unwrap();
        let kappa = traj.partition_at(last.t).kappa();
        ensure(kappa == 1, || format!("{ctx}: final kappa {kappa}"))?;
        let fe = last.freq.as_ref().unwrap().iter().fold(0.0f64, |m, f| m.max((f - om.mean()).abs()));
        ensure(fe <= 1e-8, || format!("{ctx}: final frequency error {fe:.3e}"))?;
        notes.push(format!("N={n}: {merges} merges, frequency error {worst:.1e}"));
    }
    Ok(notes.join("; "))
}

fn a6() -> Outcome {
    let init = PhaseState::new(0.0, vec![0.0, 0.4, 1.0]);
    let om = NaturalFrequencies::new(vec![0.3, 0.05, -0.35]);
    let eps: Vec<f64> = (0..5).map(|k| 0.1 * 0.5f64.powi(k)).collect();
    let c = cfg(2.0, 1e-3);

    let sub = epsilon_sweep(&init, &om, &ModelParams::new(0.25, 1.0, 3), &eps, &c).map_err(|e| e.to_string())?;
    let d: Vec<f64> = sub.rows.iter().map(|r| r.sup_dist).collect();
    ensure(d.windows(2).all(|w| w[1] < w[0]), || format!("subcritical sup-distances not decreasing: {d:?}"))?;
    ensure(d[4] <= 1e-2, || format!("subcritical final sup-distance {:.3e}", d[4]))?;

    let crit = epsilon_sweep(&init, &om, &ModelParams::new(0.5, 1.0, 3), &eps, &c).map_err(|e| e.to_string())?;
    for r in &crit.rows {
        ensure(r.linf_freq <= crit.linf_bound, || {
            format!("critical eps={}: sup |freq| {} > C_Ω + K = {}", r.eps, r.linf_freq, crit.linf_bound)
        })?;
    }
    ensure(crit.membership_residual <= 1e-6, || {
        format!("critical membership residual {:.3e} at t={}", crit.membership_residual, crit.membership_worst_t)
    })?;

    let sup = epsilon_sweep(&init, &om, &ModelParams::new(0.75, 1.0, 3), &eps, &c).map_err(|e| e.to_string())?;
    let margin = sup.rows.iter().map(|r| r.energy_margin).fold(f64::INFINITY, f64::min);
    ensure(margin >= 0.0, || format!("supercritical energy inequality margin {margin:.3e}"))?;

    Ok(format!(
        "sub sup-dist {:.2e}→{:.2e}; crit max|freq| {:.3}≤{:.3}, membership {:.1e}; super energy margin {:.3e}",
        d[0],
        d[4],
        crit.rows.iter().map(|r| r.linf_freq).fold(0.0, f64::max),
        crit.linf_bound,
        crit.membership_residual,
        margin
    ))
}

/// Set partitions of `0..n` via restricted growth strings.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut a = vec![0usize; n];
    loop {
        let k = a.iter().max().unwrap() + 1;
        let mut blocks = vec![Vec::new(); k];
        for (i, &b) in a.iter().enumerate() {
            blocks[b].push(i);
        }
        out.push(blocks);
        // next restricted growth string
        let mut i = n - 1;
        loop {
            if i == 0 {
                return out;
            }
            let m = a[..i].iter().max().unwrap() + 1;
            if a[i] < m {
                a[i] += 1;
                a[i + 1..].iter_mut().for_each(|x| *x = 0);
                break;
            }
            i -= 1;
        }
    }
}

fn a7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut partitions, mut probes, mut inside, mut skipped) = (0, 0, 0, 0);
    for n in 2..=4usize {
        let p = ModelParams::new(0.5, 1.0, n);
        let kn = 1.0 / n as f64;
        for clusters in set_partitions(n).into_iter().filter(|c| c.iter().any(|b| b.len() > 1)) {
            partitions += 1;
            let partition = ClusterPartition::from_clusters(clusters.clone());
            let phases: Vec<f64> = (0..clusters.len()).map(|k| 0.9 * k as f64 + rng.gen_range(0.0..0.3)).collect();
            let mut theta = vec![0.0; n];
            for (b, c) in clusters.iter().enumerate() {
                c.iter().for_each(|&i| theta[i] = phases[b]);
            }
            let omega: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let state = PhaseState::new(0.0, theta.clone());
            let poly = build_polytope(&state, &NaturalFrequencies::new(omega.clone()), &p, &partition)
                .map_err(|e| e.to_string())?;
            let drift: Vec<f64> = (0..n)
                .map(|i| {
                    let ci = clusters.iter().position(|c| c.contains(&i)).unwrap();
                    omega[i]
                        + kn * (0..n)
                            .filter(|j| !clusters[ci].contains(j))
                            .map(|j| sing_h(theta[j] - theta[i], 0.5))
                            .sum::<f64>()
                })
                .collect();
            let points = common::skew_grid_points(&drift, &clusters, kn);
            let basis = common::cluster_subspace(n, &clusters);
            let extent = kn * n as f64;
            let hull = common::Hull::new(&points, &drift, basis.clone());
            for probe in 0..100 {
                let mut w = drift.clone();
                for b in &basis {
                    let r = rng.gen_range(-1.0..1.0) * extent;
                    w.iter_mut().zip(b).for_each(|(x, v)| *x += r * v);
                }
                if probe % 10 == 9 {
                    // off the affine span
                    let i = rng.gen_range(0..n);
                    w[i] += rng.gen_range(-1e-2..1e-2);
                }
                let m = hull.margin(&w);
                if m.abs() < 1e-6 {
                    skipped += 1;
                    continue;
                }
                probes += 1;
                let lib = membership(&poly, &w, 1e-9);
                inside += (m > 0.0) as usize;
                ensure(lib == (m > 0.0), || {
                    format!("N={n} partition {clusters:?}: library {lib}, hull margin {m:.3e} at {w:?}")
                })?;
            }
        }
    }

    // total collision of three oscillators: a regular hexagon around the drift
    let kn = 1.0 / 3.0;
    let drift = vec![0.2, -0.1, 0.4];
    let clusters = vec![vec![0, 1, 2]];
    let points = common::skew_grid_points(&drift, &clusters, kn);
    let hull = common::Hull::new(&points, &drift, common::cluster_subspace(3, &clusters));
    let verts = hull.vertices(&points);
    let radii: Vec<f64> =
        verts.iter().map(|v| v.iter().zip(&drift).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()).collect();
    let spread = radii.iter().cloned().fold(0.0, f64::max) - radii.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(verts.len() == 6 && hull.facet_count() == 6 && spread < 1e-12, || {
        format!("hexagon: {} vertices, {} edges, radius spread {spread:.1e}", verts.len(), hull.facet_count())
    })?;
    let poly = build_polytope(
        &PhaseState::new(0.0, vec![0.0; 3]),
        &NaturalFrequencies::new(drift.clone()),
        &ModelParams::new(0.5, 1.0, 3),
        &ClusterPartition::from_clusters(clusters),
    )
    .map_err(|e| e.to_string())?;
    for v in &verts {
        ensure(membership(&poly, v, 1e-12), || format!("hexagon vertex {v:?} rejected"))?;
        let out: Vec<f64> = v.iter().zip(&drift).map(|(a, b)| b + 1.001 * (a - b)).collect();
        ensure(!membership(&poly, &out, 1e-9), || format!("point beyond vertex {v:?} accepted"))?;
    }
    Ok(format!(
        "{partitions} partitions, {probes} probes agree ({inside} inside, {skipped} near the boundary skipped); hexagon radius {:.6}",
        radii[0]
    ))
}

fn a8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n_total = 8;
    let (mut yes, mut no, mut worst) = (0, 0, 0.0f64);
    for n in 1..=5usize {
        for &ratio in &[0.1, 0.5, 1.0] {
            let k = ratio * n_total as f64;
            for _ in 0..200 {
                let centre = rng.gen_range(-2.0..2.0);
                let scale = ratio * n as f64 * rng.gen_range(0.05..1.5);
                let om: Vec<f64> = (0..n).map(|_| centre + scale * rng.gen_range(-1.0..1.0)).collect();
                let lib = sticking_critical(&om, k, n_total);
                let oracle = common::subset_sticking(&om, k, n_total, 0.0);
                ensure(lib == oracle, || format!("n={n} K/N={ratio}: sorted-prefix {lib}, subsets {oracle} for {om:?}"))?;
                let general = sticking_general_check(&RelativeFrequencyMatrix::from_omegas(&om), k, n_total, true);
                ensure(general == lib, || format!("n={n} K/N={ratio}: general check {general}, critical {lib} for {om:?}"))?;
                if lib {
                    yes += 1;
                    let mean = om.iter().sum::<f64>() / n as f64;
                    let x: Vec<f64> = om.iter().map(|w| (w - mean) * n_total as f64 / k).collect();
                    let y = construct_skew_bounded(&x)
                        .map_err(|e| format!("n={n}: witness construction failed: {e}"))?
                        .ok_or(format!("n={n}: no witness"))?;
                    let r = common::witness_residual(&y.to_dense(), &x);
                    worst = worst.max(r);
                    ensure(r <= 1e-12, || format!("n={n} K/N={ratio}: witness residual {r:.3e}"))?;
                } else {
                    no += 1;
                }
            }
        }
    }
    ensure(yes > 100 && no > 100, || format!("unbalanced draws: {yes} sticking, {no} not"))?;
    Ok(format!("3000 draws ({yes} sticking, {no} not) agree; worst witness residual {worst:.1e}"))
}

fn a9() -> Outcome {
    let alpha = 0.25;
    let d_inf = 0.5;
    let tt = theta_tilde(alpha).map_err(|e| e.to_string())?;
    ensure(d_inf < tt, || format!("D∞ {d_inf} ≥ θ̃ {tt}"))?;
    let om = NaturalFrequencies::new(vec![-0.075, -0.025, 0.025, 0.075]);
    let theta: Vec<f64> = (0..4).map(|i| 0.1 * i as f64).collect();
    let k = coupling_for_threshold_ratio(&theta, &om, alpha, d_inf, 2.0, 10.0)
        .map_err(|e| e.to_string())?
        .ok_or("no coupling reaches twice the threshold")?;
    let p = ModelParams::new(alpha, k, 4);
    let traj = integrate(&PhaseState::new(0.0, theta), &om, &p, &cfg(80.0, 0.05)).map_err(|e| e.to_string())?;
    ensure(traj.events.is_empty(), || format!("{} events", traj.events.len()))?;
    let dmax = traj.samples.iter().map(phase_diameter).fold(0.0, f64::max);
    ensure(dmax < d_inf, || format!("diameter reached {dmax}"))?;
    let reports = check_nonidentical_bounds(&traj, &p, d_inf, Slack::default()).map_err(|e| e.to_string())?;
    all_hold(&reports, "A9")?;
    for name in ["frequency_upper_envelope", "frequency_lower_envelope", "final_ordering", "no_collision"] {
        ensure(reports.iter().any(|r| r.bound_name == name), || format!("missing report {name}"))?;
    }
    let last = traj.final_state().unwrap();
    ensure(last.theta.windows(2).all(|w| w[0] < w[1]), || format!("final phases {:?} out of order", last.theta))?;
    Ok(format!("K={k:.6}; max D={dmax:.4} < {d_inf}; {} bound reports hold", reports.len()))
}

fn a10() -> Outcome {
    // subcritical: stable locked state
    let p = ModelParams::new(0.25, 1.0, 4);
    let om = NaturalFrequencies::new(vec![-0.03, -0.01, 0.01, 0.03]);
    let seed = PhaseState::new(0.0, vec![0.0, 0.1, 0.2, 0.3]);
    let eq = refine_equilibrium(&seed, &om, &p, RefineOptions::default()).map_err(|e| e.to_string())?;
    let st = linear_stability(&eq, &om, &p).map_err(|e| e.to_string())?;
    let ev = &st.eigenvalues;
    ensure(st.verdict == Verdict::Stable && st.zero_multiplicity == 1, || {
        format!("alpha=0.25: verdict {:?}, zero multiplicity {}, spectrum {ev:?}", st.verdict, st.zero_multiplicity)
    })?;
    ensure(ev.iter().filter(|l| l.abs() <= 1e-8).count() == 1 && ev.iter().filter(|l| **l < -1e-8).count() == 3, || {
        format!("alpha=0.25 spectrum {ev:?}")
    })?;
    let delta = [1e-3, -1e-3, 1e-3, -1e-3];
    let back = perturbation_response(&eq, &om, &p, &delta, &cfg(40.0, 0.1)).map_err(|e| e.to_string())?;
    ensure(back.r#final < 0.01 * back.initial, || format!("alpha=0.25 perturbation {back:?}"))?;

    // supercritical pair: unstable
    let p = ModelParams::new(0.75, 1.0, 2);
    let om = NaturalFrequencies::new(vec![-0.5, 0.5]);
    let roots = equilibrium_two(1.0, &p).map_err(|e| e.to_string())?;
    let &(r, verdict) = roots.roots.first().ok_or("alpha=0.75: no equilibrium")?;
    ensure(verdict == Verdict::Unstable, || format!("alpha=0.75 root verdict {verdict:?}"))?;
    let eq = PhaseState::new(0.0, vec![-0.5 * r, 0.5 * r]);
    let st = linear_stability(&eq, &om, &p).map_err(|e| e.to_string())?;
    let top = st.eigenvalues.last().copied().unwrap_or(f64::NAN);
    ensure(st.verdict == Verdict::Unstable && top > 1e-8 && st.zero_multiplicity == 1, || {
        format!("alpha=0.75 spectrum {:?}, verdict {:?}", st.eigenvalues, st.verdict)
    })?;
    let rate = p.coupling_over_n() * top;
    let mut departs = Vec::new();
    for s in [1.0, -1.0] {
        let delta = [-0.5e-3 * s, 0.5e-3 * s];
        let resp = perturbation_response(&eq, &om, &p, &delta, &cfg(8.0 / rate, 0.01)).map_err(|e| e.to_string())?;
        ensure(resp.r#final > 10.0 * resp.initial, || format!("alpha=0.75 perturbation {resp:?}"))?;
        departs.push(resp.r#final / resp.initial);
    }
    Ok(format!(
        "alpha=0.25 spectrum max nonzero {:.3e}, perturbation shrinks ×{:.1e}; alpha=0.75 eigenvalue {top:.4}, perturbations grow ×{:.0}/×{:.0}",
        ev[ev.len() - 2],
        back.r#final / back.initial,
        departs[0],
        departs[1]
    ))
}

fn a11() -> Outcome {
    let p = ModelParams::new(0.3, 1.0, 6).with_plasticity(0.5, 0.5);
    let init = PhaseState::confined(6, 1.0, 3);
    let traj = integrate_kind(KernelKind::RegularH, &init, &NaturalFrequencies::identical(6), &p, &cfg(6.0, 1e-2))
        .map_err(|e| e.to_string())?;
    let reports = check_regular_bounds(&traj, &p, None, Slack::new(0.0, 1e-6)).map_err(|e| e.to_string())?;
    all_hold(&reports, "A11")?;
    let last = traj.final_state().unwrap();
    Ok(format!("{} bounds hold over t∈[0,6]; final D={:.3e}", reports.len(), phase_diameter(last)))
}

fn a12() -> Outcome {
    let p = ModelParams::new(0.3, 1.0, 4).with_plasticity(0.5, 0.5);
    let init = PhaseState::confined(4, 1.0, 12);
    let om = NaturalFrequencies::uniform_zero_mean(4, 1.0, 12);
    let mut c = cfg(1.0, 1e-2);
    c.rel_tol = 1e-11;
    c.abs_tol = 1e-13;
    let rows = eta_sweep(&init, &om, &p, &[1e2, 1e3, 1e4], &c).map_err(|e| e.to_string())?;
    let d: Vec<f64> = rows.iter().map(|r| r.sup_dist).collect();
    for w in d.windows(2) {
        ensure(w[1] < w[0] && w[1] <= 0.2 * w[0], || format!("sup-distances {d:?}"))?;
    }
    Ok(format!("sup-distances {:.2e}, {:.2e}, {:.2e}", d[0], d[1], d[2]))
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("A1", a1),
        ("A2", a2),
        ("A3", a3),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
        ("A9", a9),
        ("A10", a10),
        ("A11", a11),
        ("A12", a12),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, run) in criteria {
        if filter.as_deref().is_some_and(|f| f != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("{id} PASS ({took:.2?}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL ({took:.2?}): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
