mod common;

use std::collections::BTreeSet;

use nalgebra::Vector2;
use proptest::prelude::*;
use stackpick::bench::{
    efficiency_improvement, generate_scene, run_benchmark, BenchOptions, BenchTask, CorpusKind, CorpusSpec,
};
use stackpick::collapse::CollapseThresholds;
use stackpick::fixtures;
use stackpick::physics::SimConfig;
use stackpick::planners::{
    plan_clearance_heuristic, plan_clearance_physics, plan_extraction_heuristic, plan_extraction_physics,
    validate_plan, Approach,
};
use stackpick::reconstruct::{pixel_to_metric, sample_batch, BoxObservation, Camera, ObservationSet, DEFAULT_SAMPLES};
use stackpick::scene::{BoxId, RigidBox, Scene, Shelf};

fn cfg() -> SimConfig {
    SimConfig::default()
}

fn ids(v: &[&str]) -> Vec<BoxId> {
    v.iter().map(|s| BoxId::from(*s)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn samples_keep_the_observed_front_faces(seed in any::<u64>(), base in any::<u64>()) {
        let scene = common::axis_aligned_stack(seed, 6);
        let obs = ObservationSet::from_scene(&scene);
        let batch = sample_batch(&obs, &cfg(), base, DEFAULT_SAMPLES).unwrap();
        prop_assert_eq!(batch.len(), DEFAULT_SAMPLES);
        for s in &batch {
            s.scene.validate(cfg().contact_slop).unwrap();
            for (b, truth) in s.scene.boxes.iter().zip(&scene.boxes) {
                prop_assert_eq!(&b.id, &truth.id);
                prop_assert!((b.position.x - truth.position.x).abs() < 1e-12);
                prop_assert!((b.position.y - truth.position.y).abs() < 1e-12);
                prop_assert!((b.half_extents.x - truth.half_extents.x).abs() < 1e-12);
                prop_assert!((b.half_extents.y - truth.half_extents.y).abs() < 1e-12);
                prop_assert!((b.yaw - truth.yaw).abs() < 1e-12);
                prop_assert!(b.half_extents.z >= cfg().depth_min / 2.0 - 1e-12);
            }
        }
    }
}

proptest! {
    #[test]
    fn doubling_depth_doubles_metric_size(
        u in 0.0..1280.0f64, v in 0.0..720.0f64, w in 1.0..400.0f64, h in 1.0..400.0f64, depth in 0.2..3.0f64,
    ) {
        let camera = Camera { fx: 900.0, fy: 910.0, cx: 640.0, cy: 360.0, shelf_distance: 1.0, axis_x: None, axis_y: None };
        let obs = BoxObservation {
            id: BoxId::from("x"),
            rect_center_px: Vector2::new(u, v),
            rect_size_px: Vector2::new(w, h),
            rect_angle: 0.0,
            centroid_depth: depth,
        };
        let near = pixel_to_metric(&obs, &camera);
        let far = pixel_to_metric(&BoxObservation { centroid_depth: 2.0 * depth, ..obs }, &camera);
        prop_assert_eq!(far.size, near.size * 2.0);
        prop_assert_eq!(far.center, near.center * 2.0);
    }

    #[test]
    fn efficiency_is_scale_invariant_and_sign_antisymmetric(t_bh in 0.1..500.0f64, t_pa in 0.1..500.0f64, c in 0.01..100.0f64) {
        let e = efficiency_improvement(t_bh, t_pa).unwrap();
        let scaled = efficiency_improvement(c * t_bh, c * t_pa).unwrap();
        prop_assert!((e - scaled).abs() <= 1e-9 * e.abs().max(1.0));
        let flipped = efficiency_improvement(t_pa, t_bh).unwrap();
        prop_assert_eq!(e.signum() * flipped.signum() <= 0.0, true);
        prop_assert_eq!(efficiency_improvement(t_bh, t_bh).unwrap(), 0.0);
    }
}

fn column() -> Scene {
    fixtures::dependency_chain().scene
}

#[test]
fn chain_extraction_backtracks_to_the_top() {
    let obs = ObservationSet::from_scene(&column());
    let plan = plan_extraction_physics(&obs, &BoxId::from("T"), &cfg(), &CollapseThresholds::default(), 10).unwrap();
    assert_eq!(plan.ids(), ids(&["B", "A", "T"]));
    assert!(plan.stats.simulations_run <= 3 * 3 * 10);
    assert!(plan.actions.iter().all(|a| a.predicted_safe == Some(true)));
}

#[test]
fn column_clears_top_down() {
    let scene = column();
    let obs = ObservationSet::from_scene(&scene);
    let th = CollapseThresholds::default();
    let plan = plan_clearance_physics(&obs, &cfg(), &th, 10).unwrap();
    assert_eq!(plan.ids(), ids(&["B", "A", "T"]));
    assert!(plan.stats.passes.unwrap() <= 3);
    assert!(validate_plan(&scene, &plan, &cfg(), &th).unwrap().success);
    assert_eq!(plan_clearance_heuristic(&obs).unwrap().ids(), ids(&["B", "A", "T"]));
}

#[test]
fn planning_is_deterministic() {
    let f = fixtures::structured_demo();
    let obs = ObservationSet::from_scene(&f.scene);
    let th = CollapseThresholds::default();
    let a = plan_extraction_physics(&obs, &f.target, &cfg(), &th, 10).unwrap();
    let b = plan_extraction_physics(&obs, &f.target, &cfg(), &th, 10).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let a = plan_clearance_physics(&obs, &cfg(), &th, 4).unwrap();
    let b = plan_clearance_physics(&obs, &cfg(), &th, 4).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn physics_plans_are_no_longer_than_collapse_free_heuristic_ones() {
    let spec = CorpusSpec::new(CorpusKind::Structured, 4, 11);
    let th = CollapseThresholds::default();
    let mut compared = 0;
    for i in 0..spec.n_scenes {
        let g = generate_scene(&spec, i, &cfg()).unwrap();
        for target in g.observation.ids() {
            let heuristic = plan_extraction_heuristic(&g.observation, &target).unwrap();
            assert_eq!(heuristic.ids().last(), Some(&target));
            if !validate_plan(&g.scene, &heuristic, &cfg(), &th).unwrap().success {
                continue;
            }
            let Ok(physics) = plan_extraction_physics(&g.observation, &target, &cfg(), &th, 10) else {
                continue;
            };
            assert_eq!(physics.ids().last(), Some(&target));
            assert!(
                physics.len() <= heuristic.len(),
                "{} {}: {:?} vs {:?}",
                g.scene_id,
                target,
                physics.ids(),
                heuristic.ids()
            );
            let n = g.scene.boxes.len();
            assert!(physics.stats.simulations_run <= n * n * 10);
            compared += 1;
        }
    }
    assert!(compared > 0);
}

#[test]
fn clearance_plans_permute_the_detected_boxes() {
    let f = fixtures::structured_demo();
    let obs = ObservationSet::from_scene(&f.scene);
    for plan in [
        plan_clearance_heuristic(&obs).unwrap(),
        plan_clearance_physics(&obs, &cfg(), &CollapseThresholds::default(), 4).unwrap(),
    ] {
        let mut got = plan.ids();
        got.sort();
        assert_eq!(got, obs.ids().into_iter().collect::<BTreeSet<_>>().into_iter().collect::<Vec<_>>());
    }
}

#[test]
fn structured_cubes_fill_a_three_by_three_grid() {
    let spec = CorpusSpec {
        boxes_per_scene: 9..=9,
        box_catalog: vec![[0.2, 0.2, 0.2]],
        ..CorpusSpec::new(CorpusKind::Structured, 1, 5)
    };
    let g = generate_scene(&spec, 0, &cfg()).unwrap();
    let heights: BTreeSet<i64> = g.scene.boxes.iter().map(|b| (b.position.y * 1000.0).round() as i64).collect();
    assert_eq!(heights, BTreeSet::from([100, 300, 500]));
    let batch = sample_batch(&g.observation, &cfg(), 0, DEFAULT_SAMPLES).unwrap();
    for s in batch {
        s.scene.validate(cfg().contact_slop).unwrap();
    }
}

#[test]
fn lone_boxes_gain_nothing_from_physics() {
    let spec = CorpusSpec { boxes_per_scene: 1..=1, ..CorpusSpec::new(CorpusKind::Structured, 3, 2) };
    let report = run_benchmark(
        &spec,
        BenchTask::ExtractEveryBox,
        &cfg(),
        &CollapseThresholds::default(),
        4,
        &BenchOptions::default(),
    )
    .unwrap();
    assert!(report.errors.is_empty());
    assert_eq!(report.physics.success_rate, 1.0);
    assert_eq!(report.heuristic.success_rate, 1.0);
    assert_eq!(report.efficiency_improvement_pct, Some(0.0));
    assert_eq!(report.success_rate_delta_pp, 0.0);
}

#[test]
fn every_pair_is_benchmarked_once_per_approach() {
    let spec = CorpusSpec::new(CorpusKind::Structured, 2, 21);
    let th = CollapseThresholds::default();
    let report = run_benchmark(&spec, BenchTask::ExtractEveryBox, &cfg(), &th, 4, &BenchOptions::default()).unwrap();
    let mut expected = BTreeSet::new();
    for i in 0..spec.n_scenes {
        let g = generate_scene(&spec, i, &cfg()).unwrap();
        for id in g.observation.ids() {
            expected.insert((g.scene_id.clone(), id.to_string()));
        }
    }
    for approach in [Approach::Physics, Approach::Heuristic] {
        let rows: Vec<_> = report
            .rows
            .iter()
            .filter(|r| r.approach == approach)
            .map(|r| (r.scene_id.clone(), r.target_id.clone()))
            .collect();
        let unique: BTreeSet<_> = rows.iter().cloned().collect();
        assert_eq!(rows.len(), unique.len());
        assert_eq!(unique, expected);
    }
    let again = run_benchmark(&spec, BenchTask::ExtractEveryBox, &cfg(), &th, 4, &BenchOptions::default()).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    report.write_csv(&mut a).unwrap();
    again.write_csv(&mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn shelf_bound_box_is_rejected() {
    let too_wide = RigidBox::from_corner("w", [1.2, 0.2, 0.2], [0.0, 0.0, 0.0]);
    assert!(Scene::new(Shelf::default(), vec![too_wide]).validate(0.002).is_err());
}
