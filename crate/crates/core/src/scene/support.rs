//! Quasi-static support analysis. A box is supported when the vertical
//! projection of its centroid lies inside the convex hull of the footprint
//! regions where it rests on something, shrunk by a small margin. This is
//! a purely geometric reference used to cross-check the dynamic engine.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{BoxId, RigidBox, Scene, DEFAULT_CONTACT_SLOP};
use crate::error::{Error, Result};
use crate::geom::{self, Point2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportParams {
    /// Maximum vertical gap between two surfaces that still counts as resting.
    pub slop: f64,
    /// Inward margin applied to the support hull; knife-edge balance counts
    /// as unsupported.
    pub hull_margin: f64,
}

impl Default for SupportParams {
    fn default() -> Self {
        SupportParams { slop: DEFAULT_CONTACT_SLOP, hull_margin: 0.005 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportNode {
    Floor,
    Box(BoxId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportEdge {
    pub supporter: SupportNode,
    pub supported: BoxId,
    /// Horizontal (x-z) area where the two surfaces overlap, m².
    pub overlap_area: f64,
    /// Whether the supported box's centroid lies inside the hull of all of
    /// its support regions.
    pub centroid_supported: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SupportGraph {
    pub edges: Vec<SupportEdge>,
}

impl SupportGraph {
    pub fn supporters_of(&self, id: &BoxId) -> impl Iterator<Item = &SupportEdge> {
        let id = id.clone();
        self.edges.iter().filter(move |e| e.supported == id)
    }

    pub fn supported_by<'a>(&'a self, node: &'a SupportNode) -> impl Iterator<Item = &'a SupportEdge> {
        self.edges.iter().filter(move |e| &e.supporter == node)
    }
}

/// Horizontal extent of the box where its profile crosses height `level`.
fn chord_at(b: &RigidBox, level: f64) -> Option<(f64, f64)> {
    let prof = b.front_profile();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..4 {
        let p = prof[i];
        let q = prof[(i + 1) % 4];
        if (p.y - level) * (q.y - level) <= 0.0 {
            let x = if (q.y - p.y).abs() < 1e-15 {
                lo = lo.min(p.x.min(q.x));
                hi = hi.max(p.x.max(q.x));
                continue;
            } else {
                p.x + (level - p.y) / (q.y - p.y) * (q.x - p.x)
            };
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

struct Surface {
    height: f64,
    footprint: Vec<Point2>,
}

fn bottom_surface(b: &RigidBox, slop: f64) -> Option<Surface> {
    let (bottom, _) = b.vertical_extent();
    let (x0, x1) = chord_at(b, bottom + slop)?;
    let (z0, z1) = b.depth_extent();
    Some(Surface { height: bottom, footprint: geom::rect(Point2::new(x0, z0), Point2::new(x1, z1)) })
}

fn top_surface(b: &RigidBox, slop: f64) -> Option<Surface> {
    let (_, top) = b.vertical_extent();
    let (x0, x1) = chord_at(b, top - slop)?;
    let (z0, z1) = b.depth_extent();
    Some(Surface { height: top, footprint: geom::rect(Point2::new(x0, z0), Point2::new(x1, z1)) })
}

fn floor_surface(scene: &Scene) -> Surface {
    Surface {
        height: 0.0,
        footprint: geom::rect(Point2::new(0.0, 0.0), Point2::new(scene.shelf.width, scene.shelf.depth)),
    }
}

struct Contact {
    supporter: Option<usize>,
    overlap: Vec<Point2>,
    area: f64,
}

/// All resting contacts under box `v`, considering only boxes for which
/// `alive` holds.
fn contacts_under(scene: &Scene, v: usize, alive: &dyn Fn(usize) -> bool, params: &SupportParams) -> Vec<Contact> {
    let target = &scene.boxes[v];
    let Some(bottom) = bottom_surface(target, params.slop) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut consider = |supporter: Option<usize>, top: Surface| {
        if (bottom.height - top.height).abs() >= params.slop {
            return;
        }
        let overlap = geom::clip_convex(&bottom.footprint, &top.footprint);
        let area = geom::area(&overlap);
        if area > 1e-12 {
            out.push(Contact { supporter, overlap, area });
        }
    };
    consider(None, floor_surface(scene));
    for (u, b) in scene.boxes.iter().enumerate() {
        if u == v || b.removed || !alive(u) {
            continue;
        }
        if let Some(top) = top_surface(b, params.slop) {
            consider(Some(u), top);
        }
    }
    out
}

fn centroid_supported(scene: &Scene, v: usize, contacts: &[Contact], params: &SupportParams) -> bool {
    let pts: Vec<Point2> = contacts.iter().flat_map(|c| c.overlap.iter().copied()).collect();
    let hull = geom::convex_hull(&pts);
    let b = &scene.boxes[v];
    geom::contains_with_margin(&hull, &Point2::new(b.position.x, b.position.z), params.hull_margin)
}

/// Whether box `v` is supported by the floor and the other present boxes.
pub(crate) fn is_supported(scene: &Scene, v: usize, params: &SupportParams) -> bool {
    let c = contacts_under(scene, v, &|_| true, params);
    centroid_supported(scene, v, &c, params)
}

pub fn build_support_graph(scene: &Scene) -> Result<SupportGraph> {
    build_support_graph_with(scene, &SupportParams::default())
}

pub fn build_support_graph_with(scene: &Scene, params: &SupportParams) -> Result<SupportGraph> {
    let mut ids = BTreeSet::new();
    for b in &scene.boxes {
        b.check_geometry().map_err(|e| Error::InvalidScene(e.to_string()))?;
        if !ids.insert(&b.id) {
            return Err(Error::InvalidScene(format!("duplicate box id `{}`", b.id)));
        }
    }
    let mut graph = SupportGraph::default();
    for (v, b) in scene.boxes.iter().enumerate() {
        if b.removed {
            continue;
        }
        let contacts = contacts_under(scene, v, &|_| true, params);
        let ok = centroid_supported(scene, v, &contacts, params);
        for c in contacts {
            graph.edges.push(SupportEdge {
                supporter: match c.supporter {
                    None => SupportNode::Floor,
                    Some(u) => SupportNode::Box(scene.boxes[u].id.clone()),
                },
                supported: b.id.clone(),
                overlap_area: c.area,
                centroid_supported: ok,
            });
        }
    }
    Ok(graph)
}

pub fn static_collapse_oracle(scene: &Scene, removed: &BoxId) -> Result<BTreeSet<BoxId>> {
    static_collapse_oracle_with(scene, removed, &SupportParams::default())
}

/// Boxes that lose support, directly or transitively, once `removed` is
/// taken away. Boxes that were already unsupported beforehand are not
/// reported, though they still count as supporters.
pub fn static_collapse_oracle_with(scene: &Scene, removed: &BoxId, params: &SupportParams) -> Result<BTreeSet<BoxId>> {
    let gone = scene.index_of(removed)?;
    let n = scene.boxes.len();
    let live: Vec<usize> = (0..n).filter(|&i| i != gone && !scene.boxes[i].removed).collect();

    let baseline: Vec<bool> = (0..n).map(|v| is_supported(scene, v, params)).collect();

    let mut fallen = vec![false; n];
    fallen[gone] = true;
    loop {
        let mut changed = false;
        for &v in &live {
            if fallen[v] || !baseline[v] {
                continue;
            }
            let c = contacts_under(scene, v, &|u| !fallen[u], params);
            if !centroid_supported(scene, v, &c, params) {
                fallen[v] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(live.into_iter().filter(|&v| fallen[v]).map(|v| scene.boxes[v].id.clone()).collect())
}
