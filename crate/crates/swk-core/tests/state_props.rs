use std::f64::consts::PI;

use proptest::prelude::*;
use swk_core::dynamics::integrate;
use swk_core::state::{cluster_phases, detect_partition, freq_diameter, phase_diameter};
use swk_core::{ClusterPartition, IntegratorConfig, ModelParams, NaturalFrequencies, PhaseState};

#[test]
fn partition_examples() {
    let p = cluster_phases(&[0.0, 2.0 * PI, 1.0], 1e-9);
    assert_eq!(p, ClusterPartition::from_clusters(vec![vec![0, 1], vec![2]]));
    let p = cluster_phases(&[0.0, 1e-12, 1e-12, 2.0], 1e-9);
    assert_eq!(p.clusters, vec![vec![0, 1, 2], vec![3]]);
    assert_eq!(cluster_phases(&[0.0, 1.0, 2.0], 1e-9), ClusterPartition::singletons(3));
    // transitive closure: 0~1 and 1~2 although |θ₂ − θ₀| > tol
    assert_eq!(cluster_phases(&[0.0, 0.8e-9, 1.6e-9], 1e-9).kappa(), 1);
}

#[test]
fn diameter_examples() {
    assert_eq!(phase_diameter(&PhaseState::new(0.0, vec![0.4; 5])), 0.0);
    assert_eq!(phase_diameter(&PhaseState::new(0.0, vec![0.0, 1.0, 2.5])), 2.5);
    assert!(freq_diameter(&PhaseState::new(0.0, vec![0.0])).is_err());
    let s = PhaseState { t: 0.0, theta: vec![0.0, 0.0], freq: Some(vec![-0.5, 0.25]) };
    assert_eq!(freq_diameter(&s).unwrap(), 0.75);
}

#[test]
fn partition_accessors() {
    let p = ClusterPartition::from_clusters(vec![vec![3, 1], vec![], vec![2, 0]]);
    assert_eq!(p.clusters, vec![vec![0, 2], vec![1, 3]]);
    assert_eq!(p.kappa(), 2);
    assert_eq!(p.sizes(), vec![2, 2]);
    assert_eq!(p.representatives(), vec![0, 1]);
    assert_eq!(p.labels(), vec![0, 1, 0, 1]);
    assert!(p.is_valid_for(4));
    assert!(!p.is_valid_for(5));
    assert!(!ClusterPartition { clusters: vec![vec![0], vec![0]] }.is_valid_for(1));
}

#[test]
fn confined_and_zero_mean_constructors() {
    let s = PhaseState::confined(7, 1.3, 42);
    assert_eq!(phase_diameter(&s), 1.3);
    assert_eq!(s.theta.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
    assert_eq!(PhaseState::confined(7, 1.3, 42), s);
    let om = NaturalFrequencies::uniform_zero_mean(9, 2.0, 5);
    assert!(om.mean().abs() < 1e-15);
    assert!(om.omega.iter().all(|w| w.abs() <= 2.0));
    assert!((om.c_omega - om.omega.iter().map(|w| w * w).sum::<f64>().sqrt()).abs() < 1e-15);
}

#[test]
fn csv_and_event_output() {
    let p = ModelParams::new(0.75, 1.0, 2);
    let traj = integrate(
        &PhaseState::new(0.0, vec![0.0, 0.3]),
        &NaturalFrequencies::new(vec![0.1, -0.1]),
        &p,
        &IntegratorConfig::default().with_t_end(1.0).with_sample_dt(0.25),
    )
    .unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, &["swk test".to_string()]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# swk test"));
    assert_eq!(lines.next(), Some("t,theta_1,theta_2,freq_1,freq_2"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 5);
    for r in &rows {
        let fields: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(fields.len(), 5);
    }
    let events = traj.events_json();
    let kinds: Vec<&str> = events.as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, vec!["collision", "merge"]);
    let back: Vec<swk_core::EventRecord> = serde_json::from_value(events).unwrap();
    assert_eq!(back, traj.events);
}

#[test]
fn partition_at_follows_events() {
    let p = ModelParams::new(0.5, 1.0, 3);
    let traj = integrate(
        &PhaseState::new(0.0, vec![0.0, 0.2, 1.0]),
        &NaturalFrequencies::identical(3),
        &p,
        &IntegratorConfig::default().with_t_end(2.0),
    )
    .unwrap();
    assert_eq!(traj.partition_at(0.0).kappa(), 3);
    let merges: Vec<_> = traj.events_of(swk_core::EventKind::Merge).collect();
    assert_eq!(merges.len(), 2);
    assert_eq!(traj.partition_at(merges[0].t_event).kappa(), 2);
    assert_eq!(traj.partition_at(2.0).kappa(), 1);
}

proptest! {
    #[test]
    fn partition_is_idempotent_and_relabeling_equivariant(
        raw in prop::collection::vec(0usize..6, 2..9),
        shift in -3.0f64..3.0,
        seed in 0u64..1000,
    ) {
        // phases on a coarse lattice so exact coincidences occur
        let theta: Vec<f64> = raw.iter().map(|&k| k as f64 * 0.7 + shift).collect();
        let n = theta.len();
        let part = detect_partition(&PhaseState::new(0.0, theta.clone()), 1e-9);
        prop_assert!(part.is_valid_for(n));
        // clustering the cluster phases again gives singletons
        let reps: Vec<f64> = part.representatives().iter().map(|&i| theta[i]).collect();
        prop_assert_eq!(cluster_phases(&reps, 1e-9).kappa(), part.kappa());
        // relabel by a permutation
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let permuted: Vec<f64> = perm.iter().map(|&i| theta[i]).collect();
        let q = cluster_phases(&permuted, 1e-9);
        let mapped = ClusterPartition::from_clusters(q.clusters.iter().map(|c| c.iter().map(|&k| perm[k]).collect()).collect());
        prop_assert_eq!(mapped, part);
    }

    #[test]
    fn diameter_is_shift_invariant(theta in prop::collection::vec(-5.0f64..5.0, 1..10), s in -10.0f64..10.0) {
        let d0 = phase_diameter(&PhaseState::new(0.0, theta.clone()));
        let d1 = phase_diameter(&PhaseState::new(0.0, theta.iter().map(|x| x + s).collect()));
        prop_assert!((d0 - d1).abs() <= 1e-12 * (1.0 + s.abs()));
    }
}
