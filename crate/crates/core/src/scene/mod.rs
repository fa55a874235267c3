//! Geometric scene representation: the shelf bay, the boxes in it, box-box
//! contact geometry and a quasi-static support analysis.
//!
//! Frame convention: `x` to the right, `y` up, `z` from the shelf front
//! toward the back wall. The origin is the front-bottom-left interior corner
//! of the bay.

mod contact;
mod support;

pub(crate) use contact::{collide, RawManifold};
pub use contact::{obb_contact, ContactBody, ContactManifold, ContactPoint, Obb, ShelfSurface};
pub(crate) use support::is_supported;
pub use support::{
    build_support_graph, build_support_graph_with, static_collapse_oracle, static_collapse_oracle_with, SupportEdge,
    SupportGraph, SupportNode, SupportParams,
};

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current version written into every file this crate emits.
pub const SCHEMA_VERSION: u32 = 1;

/// Contact slop used when no simulation config is at hand.
pub const DEFAULT_CONTACT_SLOP: f64 = 0.002;

/// Smallest half-extent accepted before geometry counts as degenerate.
pub const MIN_HALF_EXTENT: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoxId(pub String);

impl BoxId {
    pub fn new(id: impl Into<String>) -> Self {
        BoxId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BoxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BoxId {
    fn from(s: &str) -> Self {
        BoxId(s.to_owned())
    }
}

/// An open-fronted shelf bay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shelf {
    #[serde(alias = "w")]
    pub width: f64,
    #[serde(alias = "h")]
    pub height: f64,
    #[serde(alias = "d")]
    pub depth: f64,
    #[serde(default = "default_wall_thickness")]
    pub wall_thickness: f64,
    #[serde(default = "default_true")]
    pub has_side_walls: bool,
}

fn default_wall_thickness() -> f64 {
    0.02
}

fn default_true() -> bool {
    true
}

impl Default for Shelf {
    /// The 100 cm wide, 160 cm tall, 30 cm deep experimental bay.
    fn default() -> Self {
        Shelf { width: 1.00, height: 1.60, depth: 0.30, wall_thickness: default_wall_thickness(), has_side_walls: true }
    }
}

impl Shelf {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("width", self.width),
            ("height", self.height),
            ("depth", self.depth),
            ("wall_thickness", self.wall_thickness),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidScene(format!("shelf {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Static collider slabs: floor, back wall and (optionally) side walls.
    pub(crate) fn colliders(&self) -> Vec<(ShelfSurface, Obb)> {
        let t = self.wall_thickness;
        let (w, h, d) = (self.width, self.height, self.depth);
        let mut out = vec![
            (
                ShelfSurface::Floor,
                Obb::axis_aligned(
                    Vector3::new(w / 2.0, -t / 2.0, d / 2.0),
                    Vector3::new(w / 2.0 + t, t / 2.0, d / 2.0),
                ),
            ),
            (
                ShelfSurface::BackWall,
                Obb::axis_aligned(
                    Vector3::new(w / 2.0, h / 2.0, d + t / 2.0),
                    Vector3::new(w / 2.0 + t, h / 2.0 + t, t / 2.0),
                ),
            ),
        ];
        if self.has_side_walls {
            out.push((
                ShelfSurface::LeftWall,
                Obb::axis_aligned(Vector3::new(-t / 2.0, h / 2.0, d / 2.0), Vector3::new(t / 2.0, h / 2.0, d / 2.0)),
            ));
            out.push((
                ShelfSurface::RightWall,
                Obb::axis_aligned(Vector3::new(w + t / 2.0, h / 2.0, d / 2.0), Vector3::new(t / 2.0, h / 2.0, d / 2.0)),
            ));
        }
        out
    }
}

fn is_zero(v: &Vector3<f64>) -> bool {
    *v == Vector3::zeros()
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// A cardboard box. Orientation is a single in-plane yaw about the `z`
/// axis, which is all a front-facing camera can observe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidBox {
    pub id: BoxId,
    pub half_extents: Vector3<f64>,
    pub position: Vector3<f64>,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default = "Vector3::zeros", skip_serializing_if = "is_zero")]
    pub linear_velocity: Vector3<f64>,
    #[serde(default = "Vector3::zeros", skip_serializing_if = "is_zero")]
    pub angular_velocity: Vector3<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub removed: bool,
}

impl RigidBox {
    pub fn new(id: impl Into<BoxId>, half_extents: Vector3<f64>, position: Vector3<f64>, yaw: f64) -> Self {
        RigidBox {
            id: id.into(),
            half_extents,
            position,
            yaw,
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            removed: false,
        }
    }

    /// Convenience constructor from full dimensions `(w, h, d)` and the
    /// position of the front-bottom-left corner of the unrotated box.
    pub fn from_corner(id: impl Into<BoxId>, dims: [f64; 3], corner: [f64; 3]) -> Self {
        let half = Vector3::new(dims[0] / 2.0, dims[1] / 2.0, dims[2] / 2.0);
        let pos = Vector3::new(corner[0], corner[1], corner[2]) + half;
        RigidBox::new(id, half, pos, 0.0)
    }

    /// Mass under a uniform density; never stored so it cannot drift from
    /// the geometry.
    pub fn mass(&self, density: f64) -> f64 {
        density * 8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.yaw)
    }

    pub fn obb(&self) -> Obb {
        Obb::new(self.position, self.rotation(), self.half_extents)
    }

    pub fn check_geometry(&self) -> Result<()> {
        let h = &self.half_extents;
        if !(h.iter().all(|v| v.is_finite()) && h.min() >= MIN_HALF_EXTENT) {
            return Err(Error::DegenerateGeometry(format!("box `{}` has half extents {:?}", self.id, h.as_slice())));
        }
        if !(self.position.iter().all(|v| v.is_finite()) && self.yaw.is_finite()) {
            return Err(Error::InvalidScene(format!("box `{}` has a non-finite pose", self.id)));
        }
        Ok(())
    }

    /// The box's outline in the front (x-y) plane, counter-clockwise.
    pub fn front_profile(&self) -> [Vector2<f64>; 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hx, hy) = (self.half_extents.x, self.half_extents.y);
        let centre = Vector2::new(self.position.x, self.position.y);
        let ax = Vector2::new(c, s) * hx;
        let ay = Vector2::new(-s, c) * hy;
        [centre - ax - ay, centre + ax - ay, centre + ax + ay, centre - ax + ay]
    }

    /// Vertical extent `(bottom, top)` of the box.
    pub fn vertical_extent(&self) -> (f64, f64) {
        let prof = self.front_profile();
        let lo = prof.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let hi = prof.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Front and back face `z` coordinates.
    pub fn depth_extent(&self) -> (f64, f64) {
        (self.position.z - self.half_extents.z, self.position.z + self.half_extents.z)
    }
}

/// A shelf and the boxes on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub shelf: Shelf,
    pub boxes: Vec<RigidBox>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl Scene {
    pub fn new(shelf: Shelf, boxes: Vec<RigidBox>) -> Self {
        Scene { schema_version: SCHEMA_VERSION, shelf, boxes }
    }

    pub fn get(&self, id: &BoxId) -> Option<&RigidBox> {
        self.boxes.iter().find(|b| &b.id == id)
    }

    pub fn index_of(&self, id: &BoxId) -> Result<usize> {
        self.boxes.iter().position(|b| &b.id == id).ok_or_else(|| Error::UnknownBox(id.clone()))
    }

    pub fn ids(&self) -> Vec<BoxId> {
        self.boxes.iter().map(|b| b.id.clone()).collect()
    }

    /// Boxes that have not been removed.
    pub fn present(&self) -> impl Iterator<Item = &RigidBox> {
        self.boxes.iter().filter(|b| !b.removed)
    }

    /// Checks the resting-scene invariants: unique ids, sane sizes,
    /// containment in the bay and no interpenetration beyond `slop`.
    pub fn validate(&self, slop: f64) -> Result<()> {
        self.shelf.validate()?;
        let mut seen = BTreeSet::new();
        for b in &self.boxes {
            if !seen.insert(&b.id) {
                return Err(Error::InvalidScene(format!("duplicate box id `{}`", b.id)));
            }
            b.check_geometry()?;
            let h = &b.half_extents;
            if 2.0 * h.x > self.shelf.width + slop
                || 2.0 * h.y > self.shelf.height + slop
                || 2.0 * h.z > self.shelf.depth + slop
            {
                return Err(Error::InvalidScene(format!("box `{}` is larger than the shelf", b.id)));
            }
        }
        for b in self.present() {
            let (lo, hi) = b.obb().aabb();
            let s = &self.shelf;
            let side_bound = if s.has_side_walls { slop } else { f64::INFINITY };
            if lo.x < -side_bound
                || hi.x > s.width + side_bound
                || lo.y < -slop
                || hi.y > s.height + slop
                || lo.z < -slop
                || hi.z > s.depth + slop
            {
                return Err(Error::InvalidScene(format!("box `{}` is outside the shelf interior", b.id)));
            }
        }
        let present: Vec<&RigidBox> = self.present().collect();
        for (i, a) in present.iter().enumerate() {
            for b in &present[i + 1..] {
                if let Some(m) = obb_contact(a, b, slop)? {
                    let depth = m.max_penetration();
                    if depth > slop {
                        return Err(Error::InvalidScene(format!(
                            "boxes `{}` and `{}` interpenetrate by {depth:.4} m",
                            a.id, b.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Scene> {
        let scene: Scene = serde_json::from_str(text)?;
        check_schema_version(scene.schema_version)?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        // Serialising plain data into a String cannot fail.
        serde_json::to_string_pretty(self).expect("scene serialises")
    }
}

pub(crate) fn check_schema_version(v: u32) -> Result<()> {
    if v == 0 || v > SCHEMA_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported schema_version {v} (this build reads up to {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}
