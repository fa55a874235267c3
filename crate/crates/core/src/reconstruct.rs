//! Real-to-sim reconstruction: turns front-view box observations into
//! complete scenes by guessing the one dimension a single camera cannot
//! see, the depth extent of each box.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;
use crate::physics::{SimConfig, World};
use crate::scene::{self, BoxId, RigidBox, Scene, Shelf, SupportParams, SCHEMA_VERSION};

/// Number of depth hypotheses drawn per observation unless told otherwise.
pub const DEFAULT_SAMPLES: usize = 10;

/// Whole-sample redraws before an observation is declared unsatisfiable.
const MAX_SAMPLE_ATTEMPTS: usize = 16;

/// Pinhole intrinsics plus where the camera sits relative to the shelf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Distance from the camera to the shelf front plane, m.
    #[serde(alias = "camera_to_shelf")]
    pub shelf_distance: f64,
    /// Shelf-frame x of the optical axis; the shelf centre when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_x: Option<f64>,
    /// Shelf-frame y of the optical axis; the shelf centre when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_y: Option<f64>,
}

impl Camera {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("fx", self.fx), ("fy", self.fy), ("shelf_distance", self.shelf_distance)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("camera {name} must be positive, got {v}")));
            }
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidInput("camera principal point must be finite".into()));
        }
        Ok(())
    }
}

/// One box as a perception pipeline reports it: an oriented image-space
/// rectangle and the depth-map distance to its front face.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxObservation {
    pub id: BoxId,
    pub rect_center_px: Vector2<f64>,
    pub rect_size_px: Vector2<f64>,
    #[serde(default)]
    pub rect_angle: f64,
    pub centroid_depth: f64,
}

/// A box already expressed in shelf-frame meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricObservation {
    pub id: BoxId,
    /// Front-plane centroid `(x, y)`, m.
    pub center: Vector2<f64>,
    /// Front-face width and height, m.
    pub size: Vector2<f64>,
    #[serde(default)]
    pub yaw: f64,
    /// Depth of the front face behind the shelf front plane, m.
    #[serde(default)]
    pub front_z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservedBox {
    Pixel(BoxObservation),
    Metric(MetricObservation),
}

impl ObservedBox {
    pub fn id(&self) -> &BoxId {
        match self {
            ObservedBox::Pixel(o) => &o.id,
            ObservedBox::Metric(o) => &o.id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<Camera>,
    pub shelf: Shelf,
    pub boxes: Vec<ObservedBox>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// A front-plane rectangle in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontRect {
    pub center: Vector2<f64>,
    pub size: Vector2<f64>,
    pub yaw: f64,
}

/// Back-projects an image rectangle onto the plane at the observed depth.
/// The returned centre is relative to the optical axis, y up.
pub fn pixel_to_metric(obs: &BoxObservation, camera: &Camera) -> FrontRect {
    let z = obs.centroid_depth;
    FrontRect {
        center: Vector2::new(
            (obs.rect_center_px.x - camera.cx) * z / camera.fx,
            -(obs.rect_center_px.y - camera.cy) * z / camera.fy,
        ),
        size: Vector2::new(obs.rect_size_px.x * z / camera.fx, obs.rect_size_px.y * z / camera.fy),
        yaw: obs.rect_angle,
    }
}

impl ObservationSet {
    pub fn from_json(text: &str) -> Result<ObservationSet> {
        let obs: ObservationSet = serde_json::from_str(text)?;
        scene::check_schema_version(obs.schema_version)?;
        obs.validate()?;
        Ok(obs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("observation serialises")
    }

    pub fn ids(&self) -> Vec<BoxId> {
        self.boxes.iter().map(|b| b.id().clone()).collect()
    }

    pub fn contains(&self, id: &BoxId) -> bool {
        self.boxes.iter().any(|b| b.id() == id)
    }

    pub fn validate(&self) -> Result<()> {
        self.shelf.validate()?;
        if let Some(cam) = &self.camera {
            cam.validate()?;
        }
        let mut seen = BTreeSet::new();
        for b in &self.boxes {
            if !seen.insert(b.id()) {
                return Err(Error::InvalidInput(format!("duplicate observed box `{}`", b.id())));
            }
            match b {
                ObservedBox::Pixel(o) => {
                    if self.camera.is_none() {
                        return Err(Error::InvalidInput(format!("box `{}` is in pixels but no camera is given", o.id)));
                    }
                    if !(o.rect_size_px.min() > 0.0 && o.rect_size_px.iter().all(|v| v.is_finite())) {
                        return Err(Error::InvalidInput(format!("box `{}` has a non-positive pixel size", o.id)));
                    }
                    if !(o.centroid_depth.is_finite() && o.centroid_depth > 0.0) {
                        return Err(Error::InvalidInput(format!("box `{}` has a non-positive depth", o.id)));
                    }
                }
                ObservedBox::Metric(o) => {
                    if !(o.size.min() > 0.0 && o.size.iter().all(|v| v.is_finite())) {
                        return Err(Error::InvalidInput(format!("box `{}` has a non-positive size", o.id)));
                    }
                    if !(o.center.iter().all(|v| v.is_finite()) && o.yaw.is_finite() && o.front_z.is_finite()) {
                        return Err(Error::InvalidInput(format!("box `{}` has a non-finite pose", o.id)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Front-plane rectangle and front-face depth of every box, in shelf
    /// coordinates and observation order.
    pub fn front_rects(&self) -> Result<Vec<(BoxId, FrontRect, f64)>> {
        self.validate()?;
        self.boxes
            .iter()
            .map(|b| match b {
                ObservedBox::Metric(o) => {
                    Ok((o.id.clone(), FrontRect { center: o.center, size: o.size, yaw: o.yaw }, o.front_z.max(0.0)))
                }
                ObservedBox::Pixel(o) => {
                    // validate() guarantees a camera for pixel boxes.
                    let cam = self.camera.as_ref().expect("camera present");
                    let mut r = pixel_to_metric(o, cam);
                    r.center += Vector2::new(
                        cam.axis_x.unwrap_or(self.shelf.width / 2.0),
                        cam.axis_y.unwrap_or(self.shelf.height / 2.0),
                    );
                    Ok((o.id.clone(), r, (o.centroid_depth - cam.shelf_distance).max(0.0)))
                }
            })
            .collect()
    }

    /// Exact front-view observation of a known scene, in meters.
    pub fn from_scene(scene: &Scene) -> ObservationSet {
        ObservationSet {
            schema_version: SCHEMA_VERSION,
            camera: None,
            shelf: scene.shelf.clone(),
            boxes: scene
                .present()
                .map(|b| {
                    ObservedBox::Metric(MetricObservation {
                        id: b.id.clone(),
                        center: Vector2::new(b.position.x, b.position.y),
                        size: Vector2::new(2.0 * b.half_extents.x, 2.0 * b.half_extents.y),
                        yaw: b.yaw,
                        front_z: b.depth_extent().0.max(0.0),
                    })
                })
                .collect(),
        }
    }
}

/// One depth hypothesis of the observed scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSample {
    pub scene: Scene,
    pub sample_seed: u64,
    /// Sampled depth extent of each box, m.
    pub depth_assignment: BTreeMap<BoxId, f64>,
}

/// Per-sample seed derived from a base seed and sample index.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(base ^ splitmix(index.wrapping_add(1)))
}

struct Slot {
    id: BoxId,
    rect: FrontRect,
    front_z: f64,
    /// Largest depth that keeps the box clear of everything behind it.
    limit: f64,
}

fn profile(rect: &FrontRect) -> Vec<geom::Point2> {
    let b = RigidBox::new(
        "",
        Vector3::new(rect.size.x / 2.0, rect.size.y / 2.0, 1.0),
        Vector3::new(rect.center.x, rect.center.y, 0.0),
        rect.yaw,
    );
    b.front_profile().to_vec()
}

fn unsatisfiable(msg: String) -> Error {
    Error::UnsatisfiableObservation(msg)
}

fn slots(obs: &ObservationSet, cfg: &SimConfig) -> Result<Vec<Slot>> {
    let rects = obs.front_rects()?;
    let shelf = &obs.shelf;
    let profiles: Vec<_> = rects.iter().map(|(_, r, _)| profile(r)).collect();
    let mut out = Vec::with_capacity(rects.len());
    for (i, (id, rect, front_z)) in rects.iter().enumerate() {
        let mut limit = shelf.depth - front_z;
        for (j, (other, _, other_front)) in rects.iter().enumerate() {
            if i == j || geom::overlap_depth(&profiles[i], &profiles[j]) <= cfg.contact_slop {
                continue;
            }
            if (front_z - other_front).abs() <= cfg.contact_slop {
                return Err(unsatisfiable(format!("`{id}` and `{other}` overlap in the front view at the same depth")));
            }
            if other_front > front_z {
                limit = limit.min(other_front - front_z);
            }
        }
        if limit < cfg.depth_min {
            return Err(unsatisfiable(format!(
                "`{id}` has only {limit:.4} m of depth available, below depth_min {}",
                cfg.depth_min
            )));
        }
        out.push(Slot { id: id.clone(), rect: *rect, front_z: *front_z, limit });
    }
    Ok(out)
}

fn build_box(slot: &Slot, depth: f64) -> RigidBox {
    RigidBox::new(
        slot.id.clone(),
        Vector3::new(slot.rect.size.x / 2.0, slot.rect.size.y / 2.0, depth / 2.0),
        Vector3::new(slot.rect.center.x, slot.rect.center.y, slot.front_z + depth / 2.0),
        slot.rect.yaw,
    )
}

fn draw(slots: &[Slot], shelf: &Shelf, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Scene {
    let params = SupportParams { slop: cfg.contact_slop, ..SupportParams::default() };
    let mut depths: Vec<f64> = slots
        .iter()
        .map(|s| {
            let d = rng.random_range(cfg.depth_min..=shelf.depth - s.front_z);
            d.min(s.limit)
        })
        .collect();

    let mut scene = Scene::new(shelf.clone(), slots.iter().zip(&depths).map(|(s, &d)| build_box(s, d)).collect());

    // A static observation implies every box that could rest on its
    // supporters does. Where a deep draw pushes a centroid behind the
    // supporters' back edges, pull it forward by shrinking the depth,
    // working upward so supporters are final before their loads.
    let mut order: Vec<usize> = (0..slots.len()).collect();
    order.sort_by(|&a, &b| {
        let ya = scene.boxes[a].vertical_extent().0;
        let yb = scene.boxes[b].vertical_extent().0;
        ya.total_cmp(&yb).then(a.cmp(&b))
    });
    for v in order {
        if scene::is_supported(&scene, v, &params) {
            continue;
        }
        let back = scene
            .boxes
            .iter()
            .enumerate()
            .filter(|&(u, _)| u != v)
            .filter(|(_, u)| {
                let (lo_u, hi_u) = u.obb().aabb();
                let (lo_v, hi_v) = scene.boxes[v].obb().aabb();
                (u.vertical_extent().1 - scene.boxes[v].vertical_extent().0).abs() < params.slop
                    && lo_u.x < hi_v.x
                    && lo_v.x < hi_u.x
            })
            .map(|(_, u)| u.depth_extent().1)
            .fold(f64::NEG_INFINITY, f64::max);
        let deepest = 2.0 * (back - params.hull_margin - slots[v].front_z) - 1e-9;
        if !(deepest >= cfg.depth_min && deepest < depths[v]) {
            continue;
        }
        // Redraw from the supported range rather than pinning the box at
        // its tipping limit.
        let previous = scene.boxes[v].clone();
        for candidate in [rng.random_range(cfg.depth_min..=deepest), deepest] {
            scene.boxes[v] = build_box(&slots[v], candidate);
            if scene::is_supported(&scene, v, &params) {
                depths[v] = candidate;
                break;
            }
            scene.boxes[v] = previous.clone();
        }
    }
    scene
}

/// Largest drift, m, a box may show while a drawn scene settles. The
/// observation shows a static stack, so a hypothesis whose boxes move is
/// inconsistent with it.
pub const SETTLE_TOLERANCE: f64 = 0.005;

/// Rejects hypotheses that do not stay put through a settle followed by
/// a removal-length spell of ambient vibration. The vibration draws come
/// from a generator seeded by `seed`, independent of the sample's own.
pub fn check_at_rest(scene: &Scene, cfg: &SimConfig, seed: u64) -> Result<()> {
    let mut world = World::new(scene, cfg.clone())?;
    world.reseed(seed);
    let start: Vec<_> = world.bodies().iter().map(|b| b.position).collect();
    world.settle(cfg.settle_time)?;
    for _ in 0..cfg.steps_for(cfg.monitor_time) {
        world.shake();
        world.step()?;
    }
    for (b, p0) in world.bodies().iter().zip(start) {
        let d = (b.position - p0).norm();
        if d > SETTLE_TOLERANCE {
            return Err(unsatisfiable(format!("`{}` drifts {d:.4} m while at rest", b.id)));
        }
    }
    Ok(())
}

/// Draws one complete scene consistent with the observation.
pub fn sample_scene(obs: &ObservationSet, cfg: &SimConfig, seed: u64) -> Result<SceneSample> {
    cfg.validate()?;
    let slots = slots(obs, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_err = None;
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let scene = draw(&slots, &obs.shelf, cfg, &mut rng);
        match scene.validate(cfg.contact_slop).and_then(|()| check_at_rest(&scene, cfg, rng.random())) {
            Ok(()) => {
                let depth_assignment = scene.boxes.iter().map(|b| (b.id.clone(), 2.0 * b.half_extents.z)).collect();
                return Ok(SceneSample { scene, sample_seed: seed, depth_assignment });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(unsatisfiable(format!(
        "no valid depth assignment after {MAX_SAMPLE_ATTEMPTS} attempts; last problem: {}",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// `k` independent hypotheses, sample `i` seeded by `derive_seed(base_seed, i)`.
pub fn sample_batch(obs: &ObservationSet, cfg: &SimConfig, base_seed: u64, k: usize) -> Result<Vec<SceneSample>> {
    if k == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    (0..k)
        .map(|i| sample_scene(obs, cfg, derive_seed(base_seed, i as u64)).map_err(|e| Error::in_sample(i, e)))
        .collect()
}
