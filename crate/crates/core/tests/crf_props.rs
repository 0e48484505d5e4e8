use std::sync::Arc;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use proptest::prelude::*;

use posefuse::body::BodyModel;
use posefuse::crf::{build_graph, eval_collision, eval_temporal, CrfParams, FactorToggles, JointHypotheses, PersonModel};
use posefuse::graph::FactorKind;
use posefuse::Point3;

fn point() -> impl Strategy<Value = Point3> {
    (-500.0..500.0, -500.0..500.0, 0.0..2000.0).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn isometry() -> impl Strategy<Value = Isometry3<f64>> {
    (-3.0..3.0, -3.0..3.0, -3.0..3.0, -5000.0..5000.0, -5000.0..5000.0, -5000.0..5000.0).prop_map(|(a, b, c, x, y, z)| {
        Isometry3::from_parts(Translation3::new(x, y, z), UnitQuaternion::from_scaled_axis(Vector3::new(a, b, c)))
    })
}

fn model(frames: u32, joints: usize, n_states: usize, seed: u64) -> PersonModel {
    let mut m = PersonModel::default();
    for f in 0..frames {
        for j in 0..joints {
            let states: Arc<[Point3]> = (0..n_states)
                .map(|k| Point3::new(j as f64 * 40.0 + k as f64 * 13.0, f as f64 * 10.0 + (seed % 7) as f64, 1000.0 - k as f64 * 9.0))
                .collect();
            let data = (0..n_states).map(|k| ((k as u64 * 31 + seed + j as u64) % 10) as f64 / 10.0).collect();
            m.hypotheses.insert((f, j), JointHypotheses { states, data });
        }
    }
    m
}

proptest! {
    #[test]
    fn temporal_term_is_rigid_invariant(s in point(), a in point(), b in point(), iso in isometry()) {
        let p = CrfParams { sigma_temp_mm: 200.0, ..Default::default() };
        let v = eval_temporal(&s, &a, &b, &p);
        let w = eval_temporal(&(iso * s), &(iso * a), &(iso * b), &p);
        prop_assert!((v - w).abs() <= 1e-9 * v.max(1e-300) + 1e-300, "{v} vs {w}");
    }

    #[test]
    fn collision_term_increases_with_separation(d1 in 0.0..350.0f64, gap in 0.1..100.0f64) {
        let p = CrfParams::default();
        let o = Point3::origin();
        let d2 = (d1 + gap).min(350.0);
        prop_assume!(d2 > d1);
        let (v1, v2) = (eval_collision(&o, &Point3::new(d1, 0.0, 0.0), &p), eval_collision(&o, &Point3::new(0.0, d2, 0.0), &p));
        prop_assert!(v1 < v2);
        prop_assert!(v1 > 0.0 && v2 < 1.0);
    }

    #[test]
    fn factor_counts_follow_the_topology(t in 3u32..9) {
        let body = BodyModel::default();
        let g = build_graph(&model(t, 14, 2, 0), &body, &CrfParams::default(), FactorToggles::ALL).unwrap().graph;
        let t = t as usize;
        prop_assert_eq!(g.count(FactorKind::Data), 14 * t);
        prop_assert_eq!(g.count(FactorKind::Temporal), 14 * (t - 2));
        prop_assert_eq!(g.count(FactorKind::Collision), 6 * t);
    }

    #[test]
    fn tables_are_normalized_and_floored(seed in 0u64..1000, n_states in 1usize..6) {
        let params = CrfParams::default();
        let body = BodyModel::bare(2, vec![(0, 1)]);
        let g = build_graph(&model(4, 2, n_states, seed), &body, &params, FactorToggles::ALL).unwrap().graph;
        for f in g.factors() {
            let size: usize = f.potential.dims().iter().product();
            prop_assert!((f.potential.total() - 1.0).abs() < 1e-9);
            prop_assert!(f.potential.min_entry() >= params.epsilon_floor / size as f64 * (1.0 - 1e-12));
        }
    }
}

#[test]
fn two_symmetric_joints_over_three_frames() {
    let g = build_graph(&model(3, 2, 3, 1), &BodyModel::bare(2, vec![(0, 1)]), &CrfParams::default(), FactorToggles::ALL).unwrap();
    let graph = &g.graph;
    assert_eq!(graph.n_variables(), 6);
    assert_eq!(graph.count(FactorKind::Data), 6);
    assert_eq!(graph.count(FactorKind::Temporal), 2);
    assert_eq!(graph.count(FactorKind::Collision), 3);
    for f in graph.factors() {
        let keys: Vec<_> = f.vars.iter().map(|&v| graph.variables()[v].key).collect();
        match f.kind {
            FactorKind::Data => assert_eq!(keys.len(), 1),
            FactorKind::Temporal => {
                assert!(keys.iter().all(|k| k.joint == keys[0].joint));
                assert_eq!(keys.iter().map(|k| k.frame).collect::<Vec<_>>(), vec![0, 1, 2]);
            }
            FactorKind::Collision => {
                assert_eq!((keys[0].joint, keys[1].joint), (0, 1));
                assert_eq!(keys[0].frame, keys[1].frame);
            }
        }
    }
    // every variable: its data factor, one temporal factor, one collision factor
    for v in 0..graph.n_variables() {
        assert_eq!(graph.factors_of(v).count(), 3);
    }
}
