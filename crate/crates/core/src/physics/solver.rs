//! Sequential-impulse contact solver with split-impulse position correction.
//!
//! Real velocities only ever receive impulses that stop approach or resist
//! slip; penetration is removed through separate pseudo-velocities that are
//! integrated into positions and then discarded, so correcting overlap
//! never adds kinetic energy.

use std::collections::BTreeMap;

use arrayvec::ArrayVec;
use nalgebra::{Matrix3, Vector3};

use crate::scene::collide;

type V3 = Vector3<f64>;

/// Penetration tolerated before position correction engages.
const PENETRATION_ALLOWANCE: f64 = 0.0005;
/// Fraction of the remaining overlap removed per step.
const POSITION_BETA: f64 = 0.2;
/// Cached points closer than this (body-local, m) inherit impulses.
const WARM_MATCH_DIST: f64 = 0.01;

/// The other side of a contact pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Other {
    Body(usize),
    Static(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct PairKey {
    pub a: usize,
    pub b: Other,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct CachedPoint {
    local_a: V3,
    normal_impulse: f64,
    friction_impulse: V3,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct CachedManifold {
    points: ArrayVec<CachedPoint, 4>,
    twist_impulse: f64,
}

pub(crate) type ContactCache = BTreeMap<PairKey, CachedManifold>;

/// Velocity-level view of one body during a solve.
#[derive(Clone, Debug)]
pub(crate) struct SolverBody {
    pub v: V3,
    pub w: V3,
    pub pv: V3,
    pub pw: V3,
    pub inv_mass: f64,
    pub inv_inertia: Matrix3<f64>,
    pub center: V3,
    /// World-to-local rotation, used to key the warm-start cache.
    pub to_local: Matrix3<f64>,
}

impl SolverBody {
    pub fn fixed(center: V3, velocity: V3) -> Self {
        SolverBody {
            v: velocity,
            w: V3::zeros(),
            pv: V3::zeros(),
            pw: V3::zeros(),
            inv_mass: 0.0,
            inv_inertia: Matrix3::zeros(),
            center,
            to_local: Matrix3::identity(),
        }
    }

    fn is_fixed(&self) -> bool {
        self.inv_mass == 0.0
    }
}

struct PointRow {
    ra: V3,
    rb: V3,
    local_a: V3,
    normal_mass: f64,
    tangent_mass: [f64; 2],
    speculative: f64,
    position_bias: f64,
    normal_impulse: f64,
    tangent_impulse: [f64; 2],
    pseudo_impulse: f64,
}

struct ManifoldRow {
    key: PairKey,
    a: usize,
    b: usize,
    normal: V3,
    tangents: [V3; 2],
    twist_mass: f64,
    twist_impulse: f64,
    points: ArrayVec<PointRow, 4>,
}

pub(crate) struct Solver {
    pub friction: f64,
    pub spinning_friction: f64,
    pub iterations: u32,
    pub dt: f64,
}

fn tangent_basis(n: &V3) -> [V3; 2] {
    let seed = if n.x.abs() < 0.57735 { V3::x() } else { V3::y() };
    let t1 = n.cross(&seed).normalize();
    let t2 = n.cross(&t1);
    [t1, t2]
}

fn effective_mass(bodies: &[SolverBody], a: usize, b: usize, ra: &V3, rb: &V3, dir: &V3) -> f64 {
    let (ba, bb) = (&bodies[a], &bodies[b]);
    let ca = ra.cross(dir);
    let cb = rb.cross(dir);
    let k = ba.inv_mass + bb.inv_mass + ca.dot(&(ba.inv_inertia * ca)) + cb.dot(&(bb.inv_inertia * cb));
    if k > 0.0 {
        1.0 / k
    } else {
        0.0
    }
}

fn apply(bodies: &mut [SolverBody], a: usize, b: usize, ra: &V3, rb: &V3, p: &V3) {
    let d = bodies[a].inv_inertia * ra.cross(p);
    bodies[a].v -= p * bodies[a].inv_mass;
    bodies[a].w -= d;
    let d = bodies[b].inv_inertia * rb.cross(p);
    bodies[b].v += p * bodies[b].inv_mass;
    bodies[b].w += d;
}

fn apply_pseudo(bodies: &mut [SolverBody], a: usize, b: usize, ra: &V3, rb: &V3, p: &V3) {
    let d = bodies[a].inv_inertia * ra.cross(p);
    bodies[a].pv -= p * bodies[a].inv_mass;
    bodies[a].pw -= d;
    let d = bodies[b].inv_inertia * rb.cross(p);
    bodies[b].pv += p * bodies[b].inv_mass;
    bodies[b].pw += d;
}

fn relative_velocity(bodies: &[SolverBody], a: usize, b: usize, ra: &V3, rb: &V3) -> V3 {
    let (ba, bb) = (&bodies[a], &bodies[b]);
    (bb.v + bb.w.cross(rb)) - (ba.v + ba.w.cross(ra))
}

fn relative_pseudo_velocity(bodies: &[SolverBody], a: usize, b: usize, ra: &V3, rb: &V3) -> V3 {
    let (ba, bb) = (&bodies[a], &bodies[b]);
    (bb.pv + bb.pw.cross(rb)) - (ba.pv + ba.pw.cross(ra))
}

/// One candidate pair handed to the solver: solver-body indices plus the
/// geometry each side presents.
pub(crate) struct Pair<'a> {
    pub key: PairKey,
    pub a: usize,
    pub b: usize,
    pub obb_a: &'a crate::scene::Obb,
    pub obb_b: &'a crate::scene::Obb,
}

impl Solver {
    /// Generates contacts for `pairs`, solves them against `bodies` and
    /// returns the refreshed warm-start cache.
    pub fn solve(
        &self,
        bodies: &mut [SolverBody],
        pairs: &[Pair<'_>],
        margin: f64,
        cache: &ContactCache,
    ) -> ContactCache {
        let mut rows: Vec<ManifoldRow> = Vec::new();
        for pair in pairs {
            if bodies[pair.a].is_fixed() && bodies[pair.b].is_fixed() {
                continue;
            }
            let Some(raw) = collide(pair.obb_a, pair.obb_b, margin) else {
                continue;
            };
            rows.push(self.build_row(bodies, pair, &raw, cache.get(&pair.key)));
        }

        for row in &rows {
            let n = row.normal;
            let twist = n * row.twist_impulse;
            bodies[row.a].w -= bodies[row.a].inv_inertia * twist;
            let d = bodies[row.b].inv_inertia * twist;
            bodies[row.b].w += d;
            for p in &row.points {
                let imp = n * p.normal_impulse
                    + row.tangents[0] * p.tangent_impulse[0]
                    + row.tangents[1] * p.tangent_impulse[1];
                apply(bodies, row.a, row.b, &p.ra, &p.rb, &imp);
            }
        }

        for _ in 0..self.iterations {
            for row in rows.iter_mut() {
                self.solve_row(bodies, row);
            }
        }
        for _ in 0..self.iterations {
            for row in rows.iter_mut() {
                let n = row.normal;
                for p in row.points.iter_mut() {
                    if p.position_bias <= 0.0 && p.pseudo_impulse == 0.0 {
                        continue;
                    }
                    let vn = relative_pseudo_velocity(bodies, row.a, row.b, &p.ra, &p.rb).dot(&n);
                    let delta = p.normal_mass * (p.position_bias - vn);
                    let new = (p.pseudo_impulse + delta).max(0.0);
                    let applied = new - p.pseudo_impulse;
                    p.pseudo_impulse = new;
                    apply_pseudo(bodies, row.a, row.b, &p.ra, &p.rb, &(n * applied));
                }
            }
        }

        rows.into_iter()
            .map(|row| {
                let points = row
                    .points
                    .iter()
                    .map(|p| CachedPoint {
                        local_a: p.local_a,
                        normal_impulse: p.normal_impulse,
                        friction_impulse: row.tangents[0] * p.tangent_impulse[0]
                            + row.tangents[1] * p.tangent_impulse[1],
                    })
                    .collect();
                (row.key, CachedManifold { points, twist_impulse: row.twist_impulse })
            })
            .collect()
    }

    fn build_row(
        &self,
        bodies: &[SolverBody],
        pair: &Pair<'_>,
        raw: &crate::scene::RawManifold,
        cached: Option<&CachedManifold>,
    ) -> ManifoldRow {
        let n = raw.normal;
        let tangents = tangent_basis(&n);
        let (a, b) = (pair.a, pair.b);
        let mut points = ArrayVec::new();
        for rp in &raw.points {
            let ra = rp.position - bodies[a].center;
            let rb = rp.position - bodies[b].center;
            let local_a = bodies[a].to_local * ra;
            let (mut normal_impulse, mut tangent_impulse) = (0.0, [0.0, 0.0]);
            if let Some(c) = cached {
                let best = c
                    .points
                    .iter()
                    .map(|cp| ((cp.local_a - local_a).norm(), cp))
                    .filter(|(d, _)| *d < WARM_MATCH_DIST)
                    .min_by(|x, y| x.0.total_cmp(&y.0));
                if let Some((_, cp)) = best {
                    normal_impulse = cp.normal_impulse;
                    tangent_impulse = [cp.friction_impulse.dot(&tangents[0]), cp.friction_impulse.dot(&tangents[1])];
                }
            }
            let sep = rp.separation;
            points.push(PointRow {
                ra,
                rb,
                local_a,
                normal_mass: effective_mass(bodies, a, b, &ra, &rb, &n),
                tangent_mass: [
                    effective_mass(bodies, a, b, &ra, &rb, &tangents[0]),
                    effective_mass(bodies, a, b, &ra, &rb, &tangents[1]),
                ],
                speculative: sep.max(0.0) / self.dt,
                position_bias: -POSITION_BETA * (sep + PENETRATION_ALLOWANCE).min(0.0) / self.dt,
                normal_impulse,
                tangent_impulse,
                pseudo_impulse: 0.0,
            });
        }
        let k = n.dot(&((bodies[a].inv_inertia + bodies[b].inv_inertia) * n));
        ManifoldRow {
            key: pair.key,
            a,
            b,
            normal: n,
            tangents,
            twist_mass: if k > 0.0 { 1.0 / k } else { 0.0 },
            twist_impulse: cached.map_or(0.0, |c| c.twist_impulse),
            points,
        }
    }

    fn solve_row(&self, bodies: &mut [SolverBody], row: &mut ManifoldRow) {
        let n = row.normal;
        let (a, b) = (row.a, row.b);

        let mut total_normal = 0.0;
        for p in row.points.iter_mut() {
            let vn = relative_velocity(bodies, a, b, &p.ra, &p.rb).dot(&n);
            let delta = -p.normal_mass * (vn + p.speculative);
            let new = (p.normal_impulse + delta).max(0.0);
            let applied = new - p.normal_impulse;
            p.normal_impulse = new;
            apply(bodies, a, b, &p.ra, &p.rb, &(n * applied));
            total_normal += new;
        }

        for p in row.points.iter_mut() {
            let limit = self.friction * p.normal_impulse;
            for k in 0..2 {
                let t = row.tangents[k];
                let vt = relative_velocity(bodies, a, b, &p.ra, &p.rb).dot(&t);
                let delta = -p.tangent_mass[k] * vt;
                let new = (p.tangent_impulse[k] + delta).clamp(-limit, limit);
                let applied = new - p.tangent_impulse[k];
                p.tangent_impulse[k] = new;
                apply(bodies, a, b, &p.ra, &p.rb, &(t * applied));
            }
        }

        let limit = self.spinning_friction * total_normal;
        let spin = (bodies[b].w - bodies[a].w).dot(&n);
        let new = (row.twist_impulse - row.twist_mass * spin).clamp(-limit, limit);
        let applied = new - row.twist_impulse;
        row.twist_impulse = new;
        let l = n * applied;
        let da = bodies[a].inv_inertia * l;
        let db = bodies[b].inv_inertia * l;
        bodies[a].w -= da;
        bodies[b].w += db;
    }
}
