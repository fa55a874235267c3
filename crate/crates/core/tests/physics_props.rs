use nalgebra::Vector3;
use proptest::prelude::*;
use stackpick::physics::{SimConfig, World};
use stackpick::scene::{BoxId, RigidBox, Scene, Shelf};

fn cube(id: &str, x: f64, y: f64, z: f64) -> RigidBox {
    RigidBox::new(id, Vector3::new(0.1, 0.1, 0.1), Vector3::new(x, y, z), 0.0)
}

fn world(boxes: Vec<RigidBox>, cfg: SimConfig) -> World {
    World::new(&Scene::new(Shelf::default(), boxes), cfg).unwrap()
}

fn three_stack() -> Vec<RigidBox> {
    vec![cube("a", 0.5, 0.1, 0.1), cube("b", 0.5, 0.3, 0.1), cube("c", 0.5, 0.5, 0.1)]
}

#[test]
fn settled_stack_stays_below_the_jitter_floor() {
    let mut w = world(three_stack(), SimConfig::default());
    w.settle(2.0).unwrap();
    let at_rest = w.kinetic_energy();
    assert!(at_rest < 1e-4, "{at_rest} J after settling");
    let steps = w.config().steps_for(5.0);
    let mut peak: f64 = 0.0;
    for _ in 0..steps {
        w.step().unwrap();
        peak = peak.max(w.kinetic_energy());
    }
    assert!(peak < 1e-4, "kinetic energy rose to {peak} J");
}

#[test]
fn three_stack_survives_disturbance() {
    let mut w = world(three_stack(), SimConfig::default());
    w.settle(0.5).unwrap();
    let start: Vec<_> = w.bodies().iter().map(|b| b.position).collect();
    for _ in 0..w.config().steps_for(2.0) {
        w.shake();
        w.step().unwrap();
    }
    for (b, p) in w.bodies().iter().zip(&start) {
        assert!((b.position - p).norm() < 0.005, "{} drifted {}", b.id, (b.position - p).norm());
    }
}

#[test]
fn stepping_is_bit_deterministic() {
    let run = || {
        let mut w = world(three_stack(), SimConfig { rng_seed: 9, ..SimConfig::default() });
        w.begin_extraction(&BoxId::from("b")).unwrap();
        for _ in 0..300 {
            w.inject_disturbance();
            w.step().unwrap();
        }
        w.bodies().iter().map(|b| (b.position, b.orientation, b.linear_velocity)).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn dragged_neighbours_move_with_the_driven_box() {
    // One box rides on the pulled box, another leans on its side.
    let boxes = vec![cube("base", 0.3, 0.1, 0.1), cube("top", 0.3, 0.3, 0.1), cube("side", 0.5, 0.1, 0.1)];
    let cfg = SimConfig { disturbance_force_std: 0.0, ..SimConfig::default() };
    let mut w = world(boxes, cfg);
    w.begin_extraction(&BoxId::from("base")).unwrap();
    let z0 = |w: &World, id: &str| w.body(&BoxId::from(id)).unwrap().position.z;
    let start = [z0(&w, "top"), z0(&w, "side")];
    for _ in 0..60 {
        w.step().unwrap();
        for id in ["top", "side"] {
            // The driven box slides toward −z; friction on a neighbour acts
            // against its slip relative to the driven box, never away from it.
            // 1e-4 m/s is iteration noise against a 0.15 m/s pull.
            let vz = w.body(&BoxId::from(id)).unwrap().linear_velocity.z;
            assert!(vz <= 1e-4, "{id} pushed toward the back at {vz} m/s");
        }
    }
    assert!(z0(&w, "top") < start[0] - 1e-3);
    assert!(z0(&w, "side") < start[1]);
}

#[test]
fn settled_stacks_do_not_interpenetrate() {
    let mut w = world(three_stack(), SimConfig::default());
    w.settle(1.0).unwrap();
    w.scene().validate(w.config().contact_slop).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn momentum_is_conserved_without_gravity(
        vx in -1.0..1.0f64, vy in -0.5..0.5f64, vz in -0.2..0.2f64,
        dy in -0.15..0.15f64, yaw in -0.4..0.4f64,
    ) {
        // A bay large enough that neither box reaches a wall.
        let bay = Shelf { width: 3.0, height: 3.0, depth: 2.0, ..Shelf::default() };
        let mut a = cube("a", 1.35, 1.5, 1.0);
        a.linear_velocity = Vector3::new(vx.abs() + 0.2, vy, vz);
        let mut b = cube("b", 1.65, 1.5 + dy, 1.0);
        b.yaw = yaw;
        b.linear_velocity = Vector3::new(-vx.abs() - 0.2, -vy, -vz);
        let cfg = SimConfig { gravity: 0.0, disturbance_force_std: 0.0, ..SimConfig::default() };
        let mut w = World::new(&Scene::new(bay, vec![a, b]), cfg).unwrap();
        for _ in 0..120 {
            let before = w.linear_momentum();
            w.step().unwrap();
            prop_assert!((w.linear_momentum() - before).norm() < 1e-6);
        }
    }
}
