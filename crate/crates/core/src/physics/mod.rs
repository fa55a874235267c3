//! Deterministic fixed-step rigid-body engine for boxes on a shelf.
//!
//! Boxes keep a full orientation here even though scenes only carry an
//! in-plane yaw, so collapsing boxes can tip out of plane. All iteration is
//! over index-ordered collections; given the same state and config, two
//! runs produce bit-identical trajectories.

mod config;
mod solver;

pub use config::SimConfig;

use std::collections::BTreeMap;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{BoxId, Obb, RigidBox, Scene, Shelf, SCHEMA_VERSION};
use solver::{ContactCache, Other, Pair, PairKey, Solver, SolverBody};

type V3 = Vector3<f64>;

/// Mass, kg, for which `disturbance_force_std` is stated.
pub const DISTURBANCE_REFERENCE_MASS: f64 = 1.0;

/// Speed beyond which a run counts as diverged, m/s.
pub const EXPLOSION_SPEED: f64 = 100.0;

/// Extra distance at which contacts are generated ahead of touching, so a
/// body closing in within one step is caught before it penetrates.
const SPECULATIVE_MARGIN: f64 = 0.006;

/// Vertical speed of the gripper's initial lift, m/s; slow enough that
/// boxes riding on top are not jolted.
const LIFT_SPEED: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct Body {
    pub id: BoxId,
    pub half_extents: V3,
    pub position: V3,
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: V3,
    pub angular_velocity: V3,
    pub removed: bool,
    inv_mass: f64,
    inv_inertia_local: V3,
    force: V3,
}

impl Body {
    fn from_box(b: &RigidBox, density: f64) -> Body {
        let m = b.mass(density);
        let h = b.half_extents;
        let (x2, y2, z2) = (h.x * h.x, h.y * h.y, h.z * h.z);
        let inertia = V3::new(y2 + z2, x2 + z2, x2 + y2) * (m / 3.0);
        Body {
            id: b.id.clone(),
            half_extents: h,
            position: b.position,
            orientation: b.rotation(),
            linear_velocity: b.linear_velocity,
            angular_velocity: b.angular_velocity,
            removed: b.removed,
            inv_mass: 1.0 / m,
            inv_inertia_local: inertia.map(|v| 1.0 / v),
            force: V3::zeros(),
        }
    }

    pub fn mass(&self) -> f64 {
        1.0 / self.inv_mass
    }

    pub fn obb(&self) -> Obb {
        Obb::new(self.position, self.orientation, self.half_extents)
    }

    /// In-plane tilt: the angle of the local x axis within the x-y plane.
    pub fn yaw(&self) -> f64 {
        let x = self.orientation * V3::x();
        x.y.atan2(x.x)
    }

    fn inv_inertia_world(&self) -> Matrix3<f64> {
        let r = self.orientation.to_rotation_matrix();
        let r = r.matrix();
        r * Matrix3::from_diagonal(&self.inv_inertia_local) * r.transpose()
    }

    pub fn kinetic_energy(&self) -> f64 {
        let m = self.mass();
        let r = self.orientation.to_rotation_matrix();
        let w_local = r.inverse() * self.angular_velocity;
        let inertia = self.inv_inertia_local.map(|v| 1.0 / v);
        0.5 * m * self.linear_velocity.norm_squared() + 0.5 * w_local.component_mul(&inertia).dot(&w_local)
    }

    fn to_box(&self) -> RigidBox {
        RigidBox {
            id: self.id.clone(),
            half_extents: self.half_extents,
            position: self.position,
            yaw: self.yaw(),
            linear_velocity: self.linear_velocity,
            angular_velocity: self.angular_velocity,
            removed: self.removed,
        }
    }
}

/// Everything that evolves while stepping; snapshots are copies of this.
#[derive(Clone, Debug, PartialEq)]
struct State {
    bodies: Vec<Body>,
    elapsed: f64,
    steps: u64,
    rng: ChaCha8Rng,
    driven: Option<usize>,
    /// Height still to gain before the driven box moves purely along −z.
    lift_remaining: f64,
    cache: ContactCache,
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    config: SimConfig,
    shelf: Shelf,
    statics: Vec<Obb>,
    state: State,
    snapshots: Vec<State>,
}

/// Per-box pose and velocity at one instant, as written to trajectory dumps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyFrame {
    pub id: BoxId,
    pub position: V3,
    /// Unit quaternion as `[w, x, y, z]`.
    pub orientation: [f64; 4],
    pub yaw: f64,
    pub linear_velocity: V3,
    pub angular_velocity: V3,
    #[serde(default)]
    pub removed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub step: u64,
    pub elapsed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driven: Option<BoxId>,
    pub boxes: Vec<BodyFrame>,
}

/// First line of a trajectory dump: the static context needed to draw it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub schema_version: u32,
    pub shelf: Shelf,
    pub timestep: f64,
    pub half_extents: BTreeMap<BoxId, V3>,
}

impl World {
    pub fn new(scene: &Scene, config: SimConfig) -> Result<World> {
        config.validate()?;
        scene.shelf.validate()?;
        for b in &scene.boxes {
            b.check_geometry()?;
        }
        let bodies = scene.boxes.iter().map(|b| Body::from_box(b, config.density)).collect();
        let statics = scene.shelf.colliders().into_iter().map(|(_, obb)| obb).collect();
        Ok(World {
            state: State {
                bodies,
                elapsed: 0.0,
                steps: 0,
                rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
                driven: None,
                lift_remaining: 0.0,
                cache: ContactCache::new(),
            },
            shelf: scene.shelf.clone(),
            statics,
            config,
            snapshots: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn shelf(&self) -> &Shelf {
        &self.shelf
    }

    pub fn elapsed(&self) -> f64 {
        self.state.elapsed
    }

    pub fn step_count(&self) -> u64 {
        self.state.steps
    }

    pub fn bodies(&self) -> &[Body] {
        &self.state.bodies
    }

    pub fn body(&self, id: &BoxId) -> Result<&Body> {
        Ok(&self.state.bodies[self.index_of(id)?])
    }

    fn index_of(&self, id: &BoxId) -> Result<usize> {
        self.state.bodies.iter().position(|b| &b.id == id).ok_or_else(|| Error::UnknownBox(id.clone()))
    }

    /// The box currently being extracted, if any.
    pub fn driven(&self) -> Option<&BoxId> {
        self.state.driven.map(|i| &self.state.bodies[i].id)
    }

    pub fn extraction_active(&self) -> bool {
        self.state.driven.is_some()
    }

    /// Projection of the current state onto the yaw-only scene model.
    pub fn scene(&self) -> Scene {
        Scene::new(self.shelf.clone(), self.state.bodies.iter().map(Body::to_box).collect())
    }

    /// The current poses as a resting scene: velocities dropped and each
    /// orientation reduced to its yaw. Fails if a box has tipped out of the
    /// front plane by more than `max_tilt` radians, since yaw alone cannot
    /// describe it.
    pub fn resting_scene(&self, max_tilt: f64) -> Result<Scene> {
        let mut boxes = Vec::with_capacity(self.state.bodies.len());
        for b in &self.state.bodies {
            let z = b.orientation * V3::z();
            let tilt = z.z.clamp(-1.0, 1.0).acos();
            if !b.removed && tilt > max_tilt {
                return Err(Error::InvalidScene(format!(
                    "box `{}` is tilted {:.3} rad out of the front plane",
                    b.id, tilt
                )));
            }
            let mut r = b.to_box();
            r.linear_velocity = V3::zeros();
            r.angular_velocity = V3::zeros();
            boxes.push(r);
        }
        Ok(Scene::new(self.shelf.clone(), boxes))
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.state.bodies.iter().filter(|b| !b.removed).map(Body::kinetic_energy).sum()
    }

    pub fn linear_momentum(&self) -> V3 {
        self.state.bodies.iter().filter(|b| !b.removed).map(|b| b.linear_velocity * b.mass()).sum()
    }

    pub fn frame(&self) -> Frame {
        Frame {
            step: self.state.steps,
            elapsed: self.state.elapsed,
            driven: self.driven().cloned(),
            boxes: self
                .state
                .bodies
                .iter()
                .map(|b| BodyFrame {
                    id: b.id.clone(),
                    position: b.position,
                    orientation: [b.orientation.w, b.orientation.i, b.orientation.j, b.orientation.k],
                    yaw: b.yaw(),
                    linear_velocity: b.linear_velocity,
                    angular_velocity: b.angular_velocity,
                    removed: b.removed,
                })
                .collect(),
        }
    }

    pub fn trajectory_header(&self) -> TrajectoryHeader {
        TrajectoryHeader {
            schema_version: SCHEMA_VERSION,
            shelf: self.shelf.clone(),
            timestep: self.config.timestep,
            half_extents: self.state.bodies.iter().map(|b| (b.id.clone(), b.half_extents)).collect(),
        }
    }

    pub fn snapshot(&mut self) {
        self.snapshots.push(self.state.clone());
    }

    /// Returns to the most recent snapshot and discards it.
    pub fn restore(&mut self) -> Result<()> {
        self.state =
            self.snapshots.pop().ok_or_else(|| Error::InvalidInput("restore called with no snapshot".into()))?;
        Ok(())
    }

    pub fn snapshot_depth(&self) -> usize {
        self.snapshots.len()
    }

    /// Marks `id` as kinematically driven toward the shelf front.
    pub fn begin_extraction(&mut self, id: &BoxId) -> Result<()> {
        let i = self.index_of(id)?;
        if self.state.bodies[i].removed {
            return Err(Error::AlreadyRemoved(id.clone()));
        }
        if let Some(j) = self.state.driven {
            if j != i {
                return Err(Error::InvalidInput(format!(
                    "cannot extract `{id}` while `{}` is still being extracted",
                    self.state.bodies[j].id
                )));
            }
        }
        self.state.driven = Some(i);
        self.state.lift_remaining = self.config.extraction_lift;
        // Impulses cached while the box rested under gravity would keep
        // pressing on its neighbours once it is held kinematically.
        self.state.cache.retain(|k, _| k.a != i && k.b != Other::Body(i));
        Ok(())
    }

    /// Draws a random force for every free box; applied during the next
    /// step only. Has no effect unless an extraction is running.
    ///
    /// The standard deviation is stated for a 1 kg box and scales with
    /// mass, so every box feels the same vibration acceleration. A fixed
    /// force would exceed the friction limit of thin, light boxes and
    /// shake them loose from stacks that are perfectly stable.
    pub fn inject_disturbance(&mut self) {
        if self.state.driven.is_some() {
            self.shake();
        }
    }

    /// The disturbance of [`World::inject_disturbance`] without requiring
    /// an extraction, for checking that a scene survives ambient vibration.
    pub fn shake(&mut self) {
        let std = self.config.disturbance_force_std;
        if std == 0.0 {
            return;
        }
        // std is validated finite and non-negative.
        let normal = Normal::new(0.0, std).expect("valid normal parameters");
        let State { bodies, rng, driven, .. } = &mut self.state;
        for (i, b) in bodies.iter_mut().enumerate() {
            if Some(i) == *driven || b.removed {
                continue;
            }
            let scale = b.mass() / DISTURBANCE_REFERENCE_MASS;
            b.force += scale * V3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
        }
    }

    /// Advances one fixed timestep.
    pub fn step(&mut self) -> Result<()> {
        let cfg = &self.config;
        let dt = cfg.timestep;
        let gravity = V3::new(0.0, -cfg.gravity, 0.0);
        let state = &mut self.state;
        let lift = (state.lift_remaining / dt).min(LIFT_SPEED);
        state.lift_remaining = (state.lift_remaining - lift * dt).max(0.0);
        let drive = V3::new(0.0, lift, -cfg.extraction_speed);
        let n = state.bodies.len();

        let mut solver_bodies: Vec<SolverBody> = Vec::with_capacity(n + 1);
        for (i, b) in state.bodies.iter_mut().enumerate() {
            if state.driven == Some(i) {
                b.linear_velocity = drive;
                b.angular_velocity = V3::zeros();
                let mut sb = SolverBody::fixed(b.position, drive);
                sb.to_local = b.orientation.to_rotation_matrix().matrix().transpose();
                solver_bodies.push(sb);
                continue;
            }
            if !b.removed {
                b.linear_velocity += (gravity + b.force * b.inv_mass) * dt;
            }
            solver_bodies.push(SolverBody {
                v: b.linear_velocity,
                w: b.angular_velocity,
                pv: V3::zeros(),
                pw: V3::zeros(),
                inv_mass: b.inv_mass,
                inv_inertia: b.inv_inertia_world(),
                center: b.position,
                to_local: b.orientation.to_rotation_matrix().matrix().transpose(),
            });
        }
        let ground = n;
        solver_bodies.push(SolverBody::fixed(V3::zeros(), V3::zeros()));

        let obbs: Vec<Obb> = state.bodies.iter().map(Body::obb).collect();
        let boxes: Vec<(V3, V3)> = obbs.iter().map(Obb::aabb).collect();
        let margin = cfg.contact_slop + SPECULATIVE_MARGIN;
        let statics: Vec<(V3, V3)> = self.statics.iter().map(Obb::aabb).collect();
        let overlaps =
            |a: &(V3, V3), b: &(V3, V3)| (0..3).all(|k| a.0[k] <= b.1[k] + margin && b.0[k] <= a.1[k] + margin);

        let mut pairs = Vec::new();
        for i in 0..n {
            if state.bodies[i].removed {
                continue;
            }
            for j in i + 1..n {
                if state.bodies[j].removed || !overlaps(&boxes[i], &boxes[j]) {
                    continue;
                }
                pairs.push(Pair {
                    key: PairKey { a: i, b: Other::Body(j) },
                    a: i,
                    b: j,
                    obb_a: &obbs[i],
                    obb_b: &obbs[j],
                });
            }
            for (s, obb) in self.statics.iter().enumerate() {
                if !overlaps(&boxes[i], &statics[s]) {
                    continue;
                }
                pairs.push(Pair {
                    key: PairKey { a: i, b: Other::Static(s) },
                    a: i,
                    b: ground,
                    obb_a: &obbs[i],
                    obb_b: obb,
                });
            }
        }

        let solver = Solver {
            friction: cfg.surface_friction,
            spinning_friction: cfg.spinning_friction,
            iterations: cfg.solver_iterations,
            dt,
        };
        state.cache = solver.solve(&mut solver_bodies, &pairs, margin, &state.cache);

        for (i, b) in state.bodies.iter_mut().enumerate() {
            b.force = V3::zeros();
            if b.removed {
                continue;
            }
            let sb = &solver_bodies[i];
            if state.driven != Some(i) {
                b.linear_velocity = sb.v;
                b.angular_velocity = sb.w;
            }
            b.position += (b.linear_velocity + sb.pv) * dt;
            let w = b.angular_velocity + sb.pw;
            b.orientation = UnitQuaternion::from_scaled_axis(w * dt) * b.orientation;
            b.orientation.renormalize();
        }

        state.steps += 1;
        state.elapsed = state.steps as f64 * dt;

        if let Some(i) = state.driven {
            let (_, hi) = state.bodies[i].obb().aabb();
            if hi.z < 0.0 {
                let b = &mut state.bodies[i];
                b.removed = true;
                b.linear_velocity = V3::zeros();
                b.angular_velocity = V3::zeros();
                state.driven = None;
            }
        }

        for b in &state.bodies {
            if b.removed {
                continue;
            }
            let speed = b.linear_velocity.norm().max(b.angular_velocity.norm() * b.half_extents.max());
            if !speed.is_finite() || speed > EXPLOSION_SPEED {
                return Err(Error::SimulationExploded { id: b.id.clone(), speed, elapsed: state.elapsed });
            }
        }
        Ok(())
    }

    /// Steps for `duration` and returns each box's net centroid
    /// displacement over that interval.
    pub fn settle(&mut self, duration: f64) -> Result<BTreeMap<BoxId, f64>> {
        if !duration.is_finite() || duration <= 0.0 {
            return Err(Error::InvalidInput(format!("settle duration must be positive, got {duration}")));
        }
        let start: Vec<V3> = self.state.bodies.iter().map(|b| b.position).collect();
        for _ in 0..self.config.steps_for(duration) {
            self.step()?;
        }
        Ok(self.state.bodies.iter().zip(start).map(|(b, p0)| (b.id.clone(), (b.position - p0).norm())).collect())
    }

    /// Deletes a box outright, as if it had already been carried away.
    pub fn remove_instantly(&mut self, id: &BoxId) -> Result<()> {
        let i = self.index_of(id)?;
        let b = &mut self.state.bodies[i];
        if b.removed {
            return Err(Error::AlreadyRemoved(id.clone()));
        }
        b.removed = true;
        b.linear_velocity = V3::zeros();
        b.angular_velocity = V3::zeros();
        if self.state.driven == Some(i) {
            self.state.driven = None;
        }
        Ok(())
    }

    /// Overwrites the generator state, e.g. to give each Monte Carlo
    /// sample its own disturbance stream.
    pub fn reseed(&mut self, seed: u64) {
        self.state.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}
