//! Box-box narrowphase: separating-axis test over the 15 candidate axes
//! followed by reference/incident face clipping (or a single closest-point
//! contact for edge-edge configurations).

use arrayvec::ArrayVec;
use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{BoxId, RigidBox};
use crate::error::Result;

type V3 = Vector3<f64>;

/// Prefer face axes (and the first box's faces) unless another axis is
/// clearly better; keeps manifolds from flickering between features.
const REL_TOL: f64 = 0.95;
const ABS_TOL: f64 = 5e-4;

/// Oriented box: centre, rotation matrix whose columns are the local axes,
/// and half extents along those axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obb {
    pub center: V3,
    pub axes: Matrix3<f64>,
    pub half: V3,
}

impl Obb {
    pub fn new(center: V3, rotation: UnitQuaternion<f64>, half: V3) -> Self {
        Obb { center, axes: rotation.to_rotation_matrix().into_inner(), half }
    }

    pub fn axis_aligned(center: V3, half: V3) -> Self {
        Obb { center, axes: Matrix3::identity(), half }
    }

    #[inline]
    pub fn axis(&self, i: usize) -> V3 {
        V3::new(self.axes[(0, i)], self.axes[(1, i)], self.axes[(2, i)])
    }

    /// Half-width of the box's shadow on `dir`.
    #[inline]
    fn radius_along(&self, dir: &V3) -> f64 {
        (0..3).map(|k| self.half[k] * self.axis(k).dot(dir).abs()).sum()
    }

    pub fn aabb(&self) -> (V3, V3) {
        let ext = V3::from_fn(|i, _| (0..3).map(|j| self.axes[(i, j)].abs() * self.half[j]).sum());
        (self.center - ext, self.center + ext)
    }

    pub fn vertices(&self) -> [V3; 8] {
        let mut out = [V3::zeros(); 8];
        for (n, v) in out.iter_mut().enumerate() {
            let sx = if n & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if n & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if n & 4 == 0 { -1.0 } else { 1.0 };
            *v = self.center
                + self.axis(0) * (sx * self.half.x)
                + self.axis(1) * (sy * self.half.y)
                + self.axis(2) * (sz * self.half.z);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct RawPoint {
    pub position: V3,
    /// Signed distance along the normal; negative when penetrating.
    pub separation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RawManifold {
    /// Unit normal pointing from the first box to the second.
    pub normal: V3,
    pub points: ArrayVec<RawPoint, 4>,
}

/// Which static surface of the shelf a contact involves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShelfSurface {
    Floor,
    BackWall,
    LeftWall,
    RightWall,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactBody {
    Box(BoxId),
    Shelf(ShelfSurface),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub position: V3,
    /// Signed gap along the normal; negative values are penetration.
    pub separation: f64,
}

impl ContactPoint {
    /// Penetration depth, never negative.
    pub fn penetration(&self) -> f64 {
        (-self.separation).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactManifold {
    pub box_a: ContactBody,
    pub box_b: ContactBody,
    /// Unit normal from `box_a` toward `box_b`.
    pub normal: V3,
    pub points: Vec<ContactPoint>,
}

impl ContactManifold {
    pub fn max_penetration(&self) -> f64 {
        self.points.iter().map(ContactPoint::penetration).fold(0.0, f64::max)
    }
}

/// Contact between two boxes, or `None` when some axis separates them by
/// more than `slop`. The result does not depend on argument order beyond
/// the sign of the normal.
pub fn obb_contact(a: &RigidBox, b: &RigidBox, slop: f64) -> Result<Option<ContactManifold>> {
    a.check_geometry()?;
    b.check_geometry()?;
    if a.removed || b.removed {
        return Ok(None);
    }
    let swap = match a.id.cmp(&b.id) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            let ka = [a.position.x, a.position.y, a.position.z, a.yaw];
            let kb = [b.position.x, b.position.y, b.position.z, b.yaw];
            ka.iter().zip(kb.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne())
                == Some(std::cmp::Ordering::Greater)
        }
    };
    let (first, second) = if swap { (b, a) } else { (a, b) };
    let Some(raw) = collide(&first.obb(), &second.obb(), slop) else {
        return Ok(None);
    };
    let normal = if swap { -raw.normal } else { raw.normal };
    Ok(Some(ContactManifold {
        box_a: ContactBody::Box(a.id.clone()),
        box_b: ContactBody::Box(b.id.clone()),
        normal,
        points: raw.points.iter().map(|p| ContactPoint { position: p.position, separation: p.separation }).collect(),
    }))
}

enum Feature {
    FaceA(usize),
    FaceB(usize),
    Edge(usize, usize, V3),
}

pub(crate) fn collide(a: &Obb, b: &Obb, slop: f64) -> Option<RawManifold> {
    let d = b.center - a.center;

    let mut best_a = (f64::NEG_INFINITY, 0);
    for i in 0..3 {
        let n = a.axis(i);
        let sep = d.dot(&n).abs() - a.half[i] - b.radius_along(&n);
        if sep > slop {
            return None;
        }
        if sep > best_a.0 {
            best_a = (sep, i);
        }
    }
    let mut best_b = (f64::NEG_INFINITY, 0);
    for j in 0..3 {
        let n = b.axis(j);
        let sep = d.dot(&n).abs() - a.radius_along(&n) - b.half[j];
        if sep > slop {
            return None;
        }
        if sep > best_b.0 {
            best_b = (sep, j);
        }
    }
    let mut best_edge: Option<(f64, usize, usize, V3)> = None;
    for i in 0..3 {
        for j in 0..3 {
            let c = a.axis(i).cross(&b.axis(j));
            let len = c.norm();
            if len < 1e-6 {
                continue;
            }
            let n = c / len;
            let sep = d.dot(&n).abs() - a.radius_along(&n) - b.radius_along(&n);
            if sep > slop {
                return None;
            }
            if best_edge.is_none_or(|(s, ..)| sep > s) {
                best_edge = Some((sep, i, j, n));
            }
        }
    }

    let (face_sep, mut feature) = if best_b.0 > REL_TOL * best_a.0 + ABS_TOL {
        (best_b.0, Feature::FaceB(best_b.1))
    } else {
        (best_a.0, Feature::FaceA(best_a.1))
    };
    if let Some((sep, i, j, n)) = best_edge {
        if sep > REL_TOL * face_sep + ABS_TOL {
            feature = Feature::Edge(i, j, n);
        }
    }

    match feature {
        Feature::FaceA(i) => face_contact(a, b, i, false, slop),
        Feature::FaceB(j) => face_contact(b, a, j, true, slop),
        Feature::Edge(i, j, n) => Some(edge_contact(a, b, i, j, n)),
    }
}

fn face_contact(reference: &Obb, incident: &Obb, axis: usize, flip: bool, slop: f64) -> Option<RawManifold> {
    let d = incident.center - reference.center;
    let mut n = reference.axis(axis);
    if d.dot(&n) < 0.0 {
        n = -n;
    }
    let ref_center = reference.center + n * reference.half[axis];

    // Incident face: the one most anti-parallel to the reference normal.
    let m =
        (0..3).max_by(|&p, &q| incident.axis(p).dot(&n).abs().total_cmp(&incident.axis(q).dot(&n).abs())).unwrap_or(0);
    let inc_axis = incident.axis(m);
    let inc_normal = if inc_axis.dot(&n) > 0.0 { -inc_axis } else { inc_axis };
    let inc_center = incident.center + inc_normal * incident.half[m];
    let (p, q) = ((m + 1) % 3, (m + 2) % 3);
    let u = incident.axis(p) * incident.half[p];
    let v = incident.axis(q) * incident.half[q];

    let mut poly: ArrayVec<V3, 8> = ArrayVec::new();
    poly.extend([inc_center + u + v, inc_center - u + v, inc_center - u - v, inc_center + u - v]);
    for k in (0..3).filter(|&k| k != axis) {
        let t = reference.axis(k);
        let c = reference.center.dot(&t);
        // Widened by the slop, like the separating-axis test, so edge-on
        // touches survive clipping regardless of rounding.
        let e = reference.half[k] + slop;
        poly = clip_plane(&poly, &t, c + e);
        poly = clip_plane(&poly, &(-t), -c + e);
        if poly.is_empty() {
            return None;
        }
    }

    let mut points: ArrayVec<RawPoint, 8> = ArrayVec::new();
    for v in &poly {
        let sep = (v - ref_center).dot(&n);
        if sep <= slop {
            points.push(RawPoint { position: v - n * (0.5 * sep), separation: sep });
        }
    }
    if points.is_empty() {
        return None;
    }
    Some(RawManifold { normal: if flip { -n } else { n }, points: reduce_to_four(&points, &n) })
}

fn clip_plane(input: &ArrayVec<V3, 8>, normal: &V3, offset: f64) -> ArrayVec<V3, 8> {
    let mut out = ArrayVec::new();
    let len = input.len();
    for i in 0..len {
        let a = input[i];
        let b = input[(i + 1) % len];
        let da = a.dot(normal) - offset;
        let db = b.dot(normal) - offset;
        if da <= 0.0 {
            let _ = out.try_push(a);
        }
        if (da <= 0.0) != (db <= 0.0) {
            let s = da / (da - db);
            let _ = out.try_push(a + (b - a) * s);
        }
    }
    out
}

fn edge_contact(a: &Obb, b: &Obb, i: usize, j: usize, axis: V3) -> RawManifold {
    let d = b.center - a.center;
    let n = if d.dot(&axis) < 0.0 { -axis } else { axis };
    let sign = |x: f64| if x < 0.0 { -1.0 } else { 1.0 };

    let mut pa = a.center;
    for k in (0..3).filter(|&k| k != i) {
        pa += a.axis(k) * (a.half[k] * sign(a.axis(k).dot(&n)));
    }
    let mut pb = b.center;
    for k in (0..3).filter(|&k| k != j) {
        pb -= b.axis(k) * (b.half[k] * sign(b.axis(k).dot(&n)));
    }
    let ua = a.axis(i);
    let ub = b.axis(j);
    let p = pb - pa;
    let uaub = ua.dot(&ub);
    let q1 = ua.dot(&p);
    let q2 = ub.dot(&p);
    let denom = 1.0 - uaub * uaub;
    let (mut s, mut t) = if denom < 1e-10 { (0.0, 0.0) } else { ((q1 - uaub * q2) / denom, (uaub * q1 - q2) / denom) };
    s = s.clamp(-a.half[i], a.half[i]);
    t = t.clamp(-b.half[j], b.half[j]);
    let ca = pa + ua * s;
    let cb = pb + ub * t;
    let mut points = ArrayVec::new();
    points.push(RawPoint { position: (ca + cb) * 0.5, separation: (cb - ca).dot(&n) });
    RawManifold { normal: n, points }
}

/// Keeps the deepest point, the point farthest from it, and the two that
/// maximise the enclosed area.
fn reduce_to_four(points: &[RawPoint], normal: &V3) -> ArrayVec<RawPoint, 4> {
    let mut out = ArrayVec::new();
    if points.len() <= 4 {
        out.extend(points.iter().copied());
        return out;
    }
    let argmax = |f: &dyn Fn(&RawPoint) -> f64| {
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, p) in points.iter().enumerate() {
            let v = f(p);
            if v > best.0 {
                best = (v, k);
            }
        }
        best.1
    };
    let i0 = argmax(&|p| -p.separation);
    let p0 = points[i0].position;
    let i1 = argmax(&|p| (p.position - p0).norm_squared());
    let p1 = points[i1].position;
    let i2 = argmax(&|p| (p1 - p0).cross(&(p.position - p0)).norm_squared());
    let p2 = points[i2].position;
    // Orient the triangle so "outside" is well defined.
    let tri_n = (p1 - p0).cross(&(p2 - p0));
    let up = if tri_n.dot(normal) < 0.0 { -*normal } else { *normal };
    let i3 = argmax(&|p| {
        let q = p.position;
        let mut gain: f64 = 0.0;
        for (s, e) in [(p0, p1), (p1, p2), (p2, p0)] {
            let signed = (e - s).cross(&(q - s)).dot(&up);
            gain = gain.max(-signed);
        }
        gain
    });
    for k in [i0, i1, i2, i3] {
        if !out.iter().any(|p: &RawPoint| p.position == points[k].position) {
            out.push(points[k]);
        }
    }
    out
}
