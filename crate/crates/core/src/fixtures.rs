//! Small hand-built scenes with known answers, shipped as JSON under
//! `fixtures/` and used by the tests and the acceptance suite.

use crate::error::{Error, Result};
use crate::physics::{SimConfig, World};
use crate::scene::{BoxId, RigidBox, Scene, Shelf};

use nalgebra::Vector3;

/// Largest out-of-plane tilt, rad, tolerated when a settled world is
/// turned back into a scene.
pub const MAX_TILT: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub name: &'static str,
    pub scene: Scene,
    pub target: BoxId,
}

pub const NAMES: [&str; 3] = ["structured-demo", "counterexample", "chain"];

pub fn by_name(name: &str, cfg: &SimConfig) -> Result<Fixture> {
    match name {
        "structured-demo" => Ok(structured_demo()),
        "counterexample" => counterexample(cfg),
        "chain" => Ok(dependency_chain()),
        other => Err(Error::InvalidInput(format!("unknown fixture `{other}`; expected one of {}", NAMES.join(", ")))),
    }
}

/// Two rows of three 20 cm cubes with 1 cm column gaps; the target is the
/// bottom-left cube. Removing it drops the cube above, and nothing else
/// rests on it.
pub fn structured_demo() -> Fixture {
    let edge = 0.20;
    let gap = 0.01;
    let x0 = 0.19;
    let mut boxes = Vec::new();
    for row in 0..2 {
        for col in 0..3 {
            boxes.push(RigidBox::from_corner(
                format!("r{row}c{col}").as_str(),
                [edge, edge, edge],
                [x0 + col as f64 * (edge + gap), row as f64 * edge, 0.0],
            ));
        }
    }
    Fixture { name: "structured-demo", scene: Scene::new(Shelf::default(), boxes), target: BoxId::from("r0c0") }
}

/// A column T under A under B: removing T drops A and B, removing A drops
/// B, and B is free.
pub fn dependency_chain() -> Fixture {
    let cube = [0.2, 0.2, 0.2];
    Fixture {
        name: "chain",
        scene: Scene::new(
            Shelf::default(),
            vec![
                RigidBox::from_corner("T", cube, [0.4, 0.0, 0.0]),
                RigidBox::from_corner("A", cube, [0.4, 0.2, 0.0]),
                RigidBox::from_corner("B", cube, [0.4, 0.4, 0.0]),
            ],
        ),
        target: BoxId::from("T"),
    }
}

/// A tall `tower` carrying a `cap` cube, with a `leaner` cube tipped
/// against its left face. Height order takes the cap and then the tower,
/// which lets the leaner fall; the leaner has to come out before the
/// tower. The leaner's pose is found by letting it settle.
pub fn counterexample(cfg: &SimConfig) -> Result<Fixture> {
    let tower = RigidBox::from_corner("tower", [0.17, 0.50, 0.17], [0.40, 0.0, 0.0]);
    let cap = RigidBox::from_corner("cap", [0.20, 0.20, 0.20], [0.385, 0.50, 0.0]);
    let lean = 40f64.to_radians();
    let reach = 0.1 * (lean.cos() + lean.sin());
    let leaner = RigidBox::new(
        "leaner",
        Vector3::new(0.1, 0.1, 0.1),
        Vector3::new(0.40 - reach - 0.001, reach + 0.001, 0.1),
        lean,
    );
    let placed = Scene::new(Shelf::default(), vec![tower, cap, leaner]);
    let mut world = World::new(&placed, cfg.clone())?;
    world.settle(1.0)?;
    let drift = world.settle(cfg.settle_time)?;
    if let Some((id, d)) = drift.iter().find(|(_, &d)| d > cfg.contact_slop) {
        return Err(Error::SceneGenerationFailed(format!(
            "counterexample does not come to rest: `{id}` still moves {d:.4} m"
        )));
    }
    Ok(Fixture { name: "counterexample", scene: world.resting_scene(MAX_TILT)?, target: BoxId::from("tower") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::static_collapse_oracle;

    #[test]
    fn chain_oracle_steps() {
        let f = dependency_chain();
        let ids = |v: &[&str]| v.iter().map(|s| BoxId::from(*s)).collect::<std::collections::BTreeSet<_>>();
        assert_eq!(static_collapse_oracle(&f.scene, &BoxId::from("T")).unwrap(), ids(&["A", "B"]));
        assert_eq!(static_collapse_oracle(&f.scene, &BoxId::from("A")).unwrap(), ids(&["B"]));
        assert!(static_collapse_oracle(&f.scene, &BoxId::from("B")).unwrap().is_empty());
    }

    #[test]
    fn demo_is_valid() {
        let f = structured_demo();
        f.scene.validate(0.002).unwrap();
        assert_eq!(f.scene.boxes.len(), 6);
    }

    #[test]
    fn counterexample_leans() {
        let f = counterexample(&SimConfig::default()).unwrap();
        f.scene.validate(0.002).unwrap();
        let leaner = f.scene.get(&BoxId::from("leaner")).unwrap();
        assert!(leaner.yaw.abs() > 0.2, "leaner settled flat: yaw {}", leaner.yaw);
    }
}
