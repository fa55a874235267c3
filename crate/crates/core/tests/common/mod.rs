//! Random axis-aligned stacks where every box rests on the floor or on
//! exactly one other box, and the combined centroid of every box and the
//! load it carries lies over its supporter, so the stack is at rest.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stackpick::scene::{RigidBox, Scene, Shelf, DEFAULT_CONTACT_SLOP};

/// Clearance between a resting centroid, single or combined, and the edge
/// of its supporter, m.
const CENTROID_MARGIN: f64 = 0.02;

pub fn axis_aligned_stack(seed: u64, max_boxes: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shelf = Shelf::default();
    let n = rng.random_range(2..=max_boxes);
    let mut boxes: Vec<RigidBox> = Vec::new();
    let mut parent: Vec<Option<usize>> = Vec::new();
    let mut tries = 0;
    while boxes.len() < n && tries < 400 {
        tries += 1;
        let dims = [rng.random_range(0.12..0.35), rng.random_range(0.10..0.30), rng.random_range(0.15..0.28)];
        // Left-anchored placements favour stacking over a spread-out row.
        let x = rng.random_range(0.0..0.5);
        let z = rng.random_range(0.0..(shelf.depth - dims[2]).min(0.03));
        let Some((b, p)) = place(&boxes, &shelf, format!("b{}", boxes.len()), dims, x, z) else {
            continue;
        };
        boxes.push(b);
        parent.push(p);
        if !loads_balanced(&boxes, &parent) {
            boxes.pop();
            parent.pop();
        }
    }
    let scene = Scene::new(shelf, boxes);
    scene.validate(DEFAULT_CONTACT_SLOP).expect("generated stack is valid");
    scene
}

/// A resting pose above `x` and the index of its single supporter.
fn place(
    boxes: &[RigidBox],
    shelf: &Shelf,
    id: String,
    dims: [f64; 3],
    x: f64,
    z: f64,
) -> Option<(RigidBox, Option<usize>)> {
    let (lo, hi) = (x, x + dims[0]);
    if hi > shelf.width {
        return None;
    }
    let under: Vec<usize> = (0..boxes.len())
        .filter(|&i| {
            let (bl, bh) = boxes[i].obb().aabb();
            bl.x < hi && lo < bh.x
        })
        .collect();
    let top = under.iter().map(|&i| boxes[i].obb().aabb().1.y).fold(0.0, f64::max);
    if top + dims[1] > shelf.height {
        return None;
    }
    let b = RigidBox::from_corner(id.as_str(), dims, [x, top, z]);
    if top == 0.0 {
        return Some((b, None));
    }
    let resting: Vec<usize> = under.into_iter().filter(|&i| (boxes[i].obb().aabb().1.y - top).abs() < 1e-9).collect();
    (resting.len() == 1).then_some((b, Some(resting[0])))
}

/// Whether every box carrying weight has the combined centroid of itself
/// and its load over its own supporter.
fn loads_balanced(boxes: &[RigidBox], parent: &[Option<usize>]) -> bool {
    let volume = |b: &RigidBox| b.half_extents.product();
    let mut mass = vec![0.0; boxes.len()];
    let mut moment = vec![0.0; boxes.len()];
    // Parents precede children, so a reverse sweep accumulates subtrees.
    for v in (0..boxes.len()).rev() {
        mass[v] += volume(&boxes[v]);
        moment[v] += volume(&boxes[v]) * boxes[v].position.x;
        if let Some(p) = parent[v] {
            mass[p] += mass[v];
            moment[p] += moment[v];
        }
    }
    (0..boxes.len()).all(|v| match parent[v] {
        None => true,
        Some(p) => {
            let cx = moment[v] / mass[v];
            let (lo, hi) = boxes[p].obb().aabb();
            cx >= lo.x + CENTROID_MARGIN && cx <= hi.x - CENTROID_MARGIN
        }
    })
}
