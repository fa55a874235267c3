//! Scene corpora and head-to-head benchmark runs of the physics-aware and
//! height-order planners.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::RangeInclusive;
use std::time::Instant;

use nalgebra::Vector3;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collapse::CollapseThresholds;
use crate::error::{Error, Result};
use crate::fixtures::MAX_TILT;
use crate::physics::{SimConfig, World};
use crate::planners::{self, ActionPlan, Approach, PhysicsPlanner, Validator};
use crate::reconstruct::{check_at_rest, derive_seed, ObservationSet};
use crate::scene::{BoxId, RigidBox, Scene, Shelf, SCHEMA_VERSION};

/// Box sizes `(w, h, d)` of the experimental stock, m.
pub const DEFAULT_CATALOG: [[f64; 3]; 3] = [[0.23, 0.31, 0.25], [0.20, 0.20, 0.20], [0.50, 0.17, 0.17]];

/// Placement tries per box before generation gives up.
const PLACEMENT_ATTEMPTS: usize = 40;

/// Gap between neighbouring columns of a structured stack, m.
const COLUMN_GAP: f64 = 0.01;

/// Largest random front-face offset, m.
const MAX_FRONT_OFFSET: f64 = 0.03;

/// Share of unstructured placements that start tipped against a neighbour.
const LEAN_PROBABILITY: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    Structured,
    Unstructured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub kind: CorpusKind,
    pub n_scenes: usize,
    pub boxes_per_scene: RangeInclusive<usize>,
    pub box_catalog: Vec<[f64; 3]>,
    pub seed: u64,
    #[serde(default)]
    pub shelf: Shelf,
}

impl CorpusSpec {
    pub fn new(kind: CorpusKind, n_scenes: usize, seed: u64) -> CorpusSpec {
        CorpusSpec {
            kind,
            n_scenes,
            boxes_per_scene: match kind {
                CorpusKind::Structured => 4..=9,
                CorpusKind::Unstructured => 3..=6,
            },
            box_catalog: DEFAULT_CATALOG.to_vec(),
            seed,
            shelf: Shelf::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shelf.validate()?;
        if self.n_scenes == 0 {
            return Err(Error::InvalidInput("corpus needs at least one scene".into()));
        }
        if *self.boxes_per_scene.start() == 0 || self.boxes_per_scene.is_empty() {
            return Err(Error::InvalidInput("boxes_per_scene must be a non-empty range of positive counts".into()));
        }
        if self.box_catalog.is_empty() {
            return Err(Error::InvalidInput("box catalog is empty".into()));
        }
        for dims in &self.box_catalog {
            if dims.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
                return Err(Error::InvalidInput(format!("catalog entry {dims:?} has a non-positive side")));
            }
            if orientations(dims, &self.shelf).is_empty() {
                return Err(Error::InvalidInput(format!("catalog entry {dims:?} fits the shelf in no orientation")));
            }
        }
        Ok(())
    }
}

/// A generated ground truth and what the camera would see of it.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedScene {
    pub scene_id: String,
    pub scene: Scene,
    pub observation: ObservationSet,
}

/// Axis assignments of a catalog box with the depth fitting the shelf.
fn orientations(dims: &[f64; 3], shelf: &Shelf) -> Vec<[f64; 3]> {
    let [a, b, c] = *dims;
    let mut out: Vec<[f64; 3]> = Vec::new();
    for o in [[a, b, c], [b, a, c], [a, c, b], [c, a, b], [b, c, a], [c, b, a]] {
        if o[2] <= shelf.depth && o[0] <= shelf.width && o[1] <= shelf.height && !out.contains(&o) {
            out.push(o);
        }
    }
    out
}

fn scene_id(index: usize) -> String {
    format!("scene-{index:04}")
}

pub fn generate_scene(spec: &CorpusSpec, index: usize, cfg: &SimConfig) -> Result<GeneratedScene> {
    spec.validate()?;
    if index >= spec.n_scenes {
        return Err(Error::InvalidInput(format!("scene index {index} out of range for a corpus of {}", spec.n_scenes)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, index as u64));
    let scene = match spec.kind {
        CorpusKind::Structured => structured(spec, &mut rng)?,
        CorpusKind::Unstructured => unstructured(spec, cfg, &mut rng)?,
    };
    Ok(GeneratedScene { scene_id: scene_id(index), observation: ObservationSet::from_scene(&scene), scene })
}

/// One box type per scene laid out in a near-square grid, filled bottom
/// row first, each box pushed back by a random offset.
fn structured(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Result<Scene> {
    let shelf = &spec.shelf;
    let n = rng.random_range(spec.boxes_per_scene.clone());
    let dims = *spec.box_catalog.choose(rng).expect("catalog validated non-empty");
    let options = orientations(&dims, shelf);
    let [w, h, d] = *options.choose(rng).expect("catalog validated to fit");
    let max_cols = ((shelf.width + COLUMN_GAP) / (w + COLUMN_GAP)).floor() as usize;
    let max_rows = (shelf.height / h).floor() as usize;
    let cols = ((n as f64).sqrt().ceil() as usize).min(max_cols);
    if cols == 0 || n.div_ceil(cols) > max_rows {
        return Err(Error::SceneGenerationFailed(format!(
            "{n} boxes of {w}×{h} m do not fit a {}×{} m shelf",
            shelf.width, shelf.height
        )));
    }
    let span = cols as f64 * w + (cols - 1) as f64 * COLUMN_GAP;
    let x0 = (shelf.width - span) / 2.0;
    // Offsets stay small against the depth so every box keeps its centroid
    // over the one below.
    let max_offset = MAX_FRONT_OFFSET.min(shelf.depth - d).min(d / 4.0);
    let boxes = (0..n)
        .map(|i| {
            let (row, col) = (i / cols, i % cols);
            let z = rng.random_range(0.0..=max_offset);
            RigidBox::from_corner(
                format!("b{i}").as_str(),
                [w, h, d],
                [x0 + col as f64 * (w + COLUMN_GAP), row as f64 * h, z],
            )
        })
        .collect();
    let scene = Scene::new(shelf.clone(), boxes);
    scene.validate(crate::scene::DEFAULT_CONTACT_SLOP)?;
    Ok(scene)
}

/// Front-plane half extents of a box of half size `(hx, hy)` at `yaw`.
fn rotated_half(hx: f64, hy: f64, yaw: f64) -> (f64, f64) {
    let (s, c) = yaw.sin_cos();
    (hx * c.abs() + hy * s.abs(), hx * s.abs() + hy * c.abs())
}

/// Highest occupied point above the x interval, or the floor.
fn surface_under(boxes: &[RigidBox], lo: f64, hi: f64) -> f64 {
    boxes
        .iter()
        .filter(|b| !b.removed)
        .map(|b| b.obb().aabb())
        .filter(|(l, h)| l.x < hi && lo < h.x)
        .map(|(_, h)| h.y)
        .fold(0.0, f64::max)
}

/// A drop pose above the current pile, or a pose tipped against the side
/// of a neighbour.
fn propose(id: &str, placed: &[RigidBox], spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Option<RigidBox> {
    let shelf = &spec.shelf;
    let dims = *spec.box_catalog.choose(rng)?;
    let [w, h, d] = *orientations(&dims, shelf).choose(rng)?;
    let half = Vector3::new(w / 2.0, h / 2.0, d / 2.0);
    let z = rng.random_range(0.0..=MAX_FRONT_OFFSET.min(shelf.depth - d)) + half.z;
    let max_yaw = 30f64.to_radians();

    if !placed.is_empty() && rng.random_bool(LEAN_PROBABILITY) {
        let other = placed.choose(rng)?;
        let (lo, hi) = other.obb().aabb();
        let lean = rng.random_range(20f64.to_radians()..=max_yaw);
        let right_side = rng.random_bool(0.5);
        // Leaning left onto a box on the right tips counter-clockwise.
        let yaw = if right_side { -lean } else { lean };
        let (ex, ey) = rotated_half(half.x, half.y, yaw);
        let x = if right_side { hi.x + 0.001 + ex } else { lo.x - 0.001 - ex };
        let footing = surface_under(placed, x - ex, x + ex).min(lo.y);
        let y = footing + ey + 0.001;
        if x - ex < 0.0 || x + ex > shelf.width || y + ey > shelf.height {
            return None;
        }
        return Some(RigidBox::new(id, half, Vector3::new(x, y, z), yaw));
    }

    let yaw = rng.random_range(-max_yaw..=max_yaw);
    let (ex, ey) = rotated_half(half.x, half.y, yaw);
    if 2.0 * ex + 0.01 > shelf.width {
        return None;
    }
    let x = rng.random_range(ex + 0.005..=shelf.width - ex - 0.005);
    let y = surface_under(placed, x - ex, x + ex) + ey + 0.003;
    if y + ey > shelf.height {
        return None;
    }
    Some(RigidBox::new(id, half, Vector3::new(x, y, z), yaw))
}

/// Settles `scene` and returns the resting poses if every box stayed in
/// the bay, upright in depth, and at rest.
fn settle_placement(scene: &Scene, cfg: &SimConfig, seed: u64) -> Result<Scene> {
    let mut world = World::new(scene, cfg.clone())?;
    world.settle(1.5)?;
    let settled = world.resting_scene(MAX_TILT)?;
    for b in &settled.boxes {
        let (lo, _) = b.obb().aabb();
        if lo.y < -cfg.contact_slop || lo.z < -cfg.contact_slop {
            return Err(Error::InvalidScene(format!("box `{}` left the shelf", b.id)));
        }
    }
    settled.validate(cfg.contact_slop)?;
    check_at_rest(&settled, cfg, seed)?;
    let mut check = World::new(&settled, cfg.clone())?;
    check.settle(cfg.settle_time)?;
    let ke = check.kinetic_energy();
    if ke >= JITTER_FLOOR {
        return Err(Error::InvalidScene(format!("settled scene still carries {ke:.2e} J")));
    }
    Ok(settled)
}

/// Kinetic energy, J, below which a scene counts as at rest.
pub const JITTER_FLOOR: f64 = 1e-4;

/// Boxes placed one at a time, each settled before the next is added.
fn unstructured(spec: &CorpusSpec, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<Scene> {
    let n = rng.random_range(spec.boxes_per_scene.clone());
    let mut placed: Vec<RigidBox> = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("b{i}");
        let mut last_problem = String::from("no pose fits");
        let mut accepted = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let Some(candidate) = propose(&id, &placed, spec, rng) else {
                continue;
            };
            let mut boxes = placed.clone();
            boxes.push(candidate);
            let scene = Scene::new(spec.shelf.clone(), boxes);
            if let Err(e) = scene.validate(cfg.contact_slop) {
                last_problem = e.to_string();
                continue;
            }
            match settle_placement(&scene, cfg, rng.random()) {
                Ok(settled) => {
                    accepted = Some(settled);
                    break;
                }
                Err(e) => last_problem = e.to_string(),
            }
        }
        match accepted {
            Some(s) => placed = s.boxes,
            None => {
                return Err(Error::SceneGenerationFailed(format!(
                    "could not place box {} of {n} after {PLACEMENT_ATTEMPTS} attempts; last problem: {last_problem}",
                    i + 1
                )))
            }
        }
    }
    Ok(Scene::new(spec.shelf.clone(), placed))
}

pub fn generate_corpus(spec: &CorpusSpec, cfg: &SimConfig) -> Vec<Result<GeneratedScene>> {
    (0..spec.n_scenes).into_par_iter().map(|i| generate_scene(spec, i, cfg)).collect()
}

/// Extra time the height-order baseline takes, as a percentage of the
/// physics-aware time: `100 (t_bh - t_pa) / t_pa`. Note the denominator;
/// against `t_bh` the same times give a smaller figure.
pub fn efficiency_improvement(t_bh: f64, t_pa: f64) -> Result<f64> {
    if !(t_pa.is_finite() && t_bh.is_finite()) || t_pa <= 0.0 {
        return Err(Error::InvalidInput(format!("efficiency needs a positive physics-aware time, got {t_pa}")));
    }
    Ok(100.0 * (t_bh - t_pa) / t_pa)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchTask {
    ExtractEveryBox,
    Clear,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    /// Record wall-clock planning times. Off by default so reports are
    /// reproducible byte for byte.
    pub wall_clock: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scene_id: String,
    /// Empty for clearance runs.
    pub target_id: String,
    pub approach: Approach,
    pub success: bool,
    pub boxes_removed: usize,
    pub est_time_s: f64,
    pub planning_time_s: f64,
    pub sims_run: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproachSummary {
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub avg_boxes_removed: f64,
    pub avg_estimated_time_s: f64,
    /// Averages over successful runs only.
    pub avg_boxes_removed_successful: Option<f64>,
    pub avg_estimated_time_successful_s: Option<f64>,
    pub total_simulations: usize,
}

impl ApproachSummary {
    fn from_rows<'a>(rows: impl Iterator<Item = &'a BenchRow>) -> ApproachSummary {
        let rows: Vec<&BenchRow> = rows.collect();
        let runs = rows.len();
        let ok: Vec<&&BenchRow> = rows.iter().filter(|r| r.success).collect();
        let mean = |v: &mut dyn Iterator<Item = f64>, n: usize| {
            if n == 0 {
                None
            } else {
                Some(v.sum::<f64>() / n as f64)
            }
        };
        ApproachSummary {
            runs,
            successes: ok.len(),
            success_rate: if runs == 0 { 0.0 } else { ok.len() as f64 / runs as f64 },
            avg_boxes_removed: mean(&mut rows.iter().map(|r| r.boxes_removed as f64), runs).unwrap_or(0.0),
            avg_estimated_time_s: mean(&mut rows.iter().map(|r| r.est_time_s), runs).unwrap_or(0.0),
            avg_boxes_removed_successful: mean(&mut ok.iter().map(|r| r.boxes_removed as f64), ok.len()),
            avg_estimated_time_successful_s: mean(&mut ok.iter().map(|r| r.est_time_s), ok.len()),
            total_simulations: rows.iter().map(|r| r.sims_run).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneError {
    pub scene_id: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub kind: CorpusKind,
    pub task: BenchTask,
    pub scenes: usize,
    pub samples: usize,
    pub physics: ApproachSummary,
    pub heuristic: ApproachSummary,
    /// Physics-aware minus heuristic success rate, percentage points.
    pub success_rate_delta_pp: f64,
    /// From the two average estimated times; absent when the physics-aware
    /// average is zero.
    pub efficiency_improvement_pct: Option<f64>,
    pub errors: Vec<SceneError>,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    fn from_rows(
        corpus: &CorpusSpec,
        task: BenchTask,
        k: usize,
        mut rows: Vec<BenchRow>,
        errors: Vec<SceneError>,
    ) -> BenchReport {
        rows.sort_by(|a, b| (&a.scene_id, &a.target_id, a.approach).cmp(&(&b.scene_id, &b.target_id, b.approach)));
        let physics = ApproachSummary::from_rows(rows.iter().filter(|r| r.approach == Approach::Physics));
        let heuristic = ApproachSummary::from_rows(rows.iter().filter(|r| r.approach == Approach::Heuristic));
        BenchReport {
            schema_version: SCHEMA_VERSION,
            kind: corpus.kind,
            task,
            scenes: corpus.n_scenes,
            samples: k,
            success_rate_delta_pp: 100.0 * (physics.success_rate - heuristic.success_rate),
            efficiency_improvement_pct: efficiency_improvement(
                heuristic.avg_estimated_time_s,
                physics.avg_estimated_time_s,
            )
            .ok(),
            physics,
            heuristic,
            errors,
            rows,
        }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Runs both planners on every scene, validating each plan on the
/// ground truth. Scene failures are recorded, never fatal.
pub fn run_benchmark(
    corpus: &CorpusSpec,
    task: BenchTask,
    cfg: &SimConfig,
    thresholds: &CollapseThresholds,
    k: usize,
    options: &BenchOptions,
) -> Result<BenchReport> {
    corpus.validate()?;
    cfg.validate()?;
    thresholds.validate()?;
    if k == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let results: Vec<(String, Result<Vec<BenchRow>>)> = (0..corpus.n_scenes)
        .into_par_iter()
        .map(|i| {
            let scene_cfg = SimConfig { rng_seed: derive_seed(cfg.rng_seed, i as u64), ..cfg.clone() };
            let rows =
                generate_scene(corpus, i, cfg).and_then(|g| bench_scene(&g, task, &scene_cfg, thresholds, k, options));
            (scene_id(i), rows)
        })
        .collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (scene_id, r) in results {
        match r {
            Ok(mut v) => rows.append(&mut v),
            Err(e) => errors.push(SceneError { scene_id, message: e.to_string() }),
        }
    }
    Ok(BenchReport::from_rows(corpus, task, k, rows, errors))
}

struct Timer(Option<Instant>);

impl Timer {
    fn start(on: bool) -> Timer {
        Timer(on.then(Instant::now))
    }

    fn seconds(&self) -> f64 {
        self.0.map_or(0.0, |t| t.elapsed().as_secs_f64())
    }
}

fn row(scene: &GeneratedScene, target: Option<&BoxId>, approach: Approach) -> BenchRow {
    BenchRow {
        scene_id: scene.scene_id.clone(),
        target_id: target.map(|t| t.to_string()).unwrap_or_default(),
        approach,
        success: false,
        boxes_removed: 0,
        est_time_s: 0.0,
        planning_time_s: 0.0,
        sims_run: 0,
    }
}

fn executed(mut r: BenchRow, plan: &ActionPlan, validator: &mut Validator) -> Result<BenchRow> {
    let report = validator.validate(plan)?;
    r.success = report.success;
    r.boxes_removed = report.boxes_removed;
    r.est_time_s = report.estimated_time;
    r.sims_run = plan.stats.simulations_run;
    Ok(r)
}

/// Benchmark rows for one scene; the planner and validator caches are
/// shared across the scene's targets.
pub fn bench_scene(
    scene: &GeneratedScene,
    task: BenchTask,
    cfg: &SimConfig,
    thresholds: &CollapseThresholds,
    k: usize,
    options: &BenchOptions,
) -> Result<Vec<BenchRow>> {
    let obs = &scene.observation;
    let mut validator = Validator::new(&scene.scene, cfg, thresholds)?;
    let mut physics = PhysicsPlanner::new(obs, cfg, thresholds, k)?;
    let mut rows = Vec::new();
    let targets: Vec<Option<BoxId>> = match task {
        BenchTask::ExtractEveryBox => obs.ids().into_iter().map(Some).collect(),
        BenchTask::Clear => vec![None],
    };
    for target in &targets {
        let target = target.as_ref();

        let timer = Timer::start(options.wall_clock);
        let planned = match target {
            Some(t) => physics.extract(t),
            None => physics.clear(),
        };
        let seconds = timer.seconds();
        let mut r = row(scene, target, Approach::Physics);
        r.planning_time_s = seconds;
        let r = match planned {
            Ok(plan) => executed(r, &plan, &mut validator)?,
            // A partial clearance is still carried out; it just cannot
            // count as a success.
            Err(Error::UnclearableResidue { partial, .. }) => {
                let mut r = executed(r, &partial, &mut validator)?;
                r.success = false;
                r
            }
            Err(Error::PlanNotFound { trace, .. }) => {
                r.sims_run = trace.len() * physics.samples();
                r
            }
            Err(e) => return Err(e),
        };
        rows.push(r);

        let timer = Timer::start(options.wall_clock);
        let plan = match target {
            Some(t) => planners::plan_extraction_heuristic(obs, t)?,
            None => planners::plan_clearance_heuristic(obs)?,
        };
        let mut r = row(scene, target, Approach::Heuristic);
        r.planning_time_s = timer.seconds();
        rows.push(executed(r, &plan, &mut validator)?);
    }
    Ok(rows)
}

/// Per-approach counts keyed by scene, for spotting where outcomes split.
pub fn divergent_scenes(report: &BenchReport) -> Vec<String> {
    let mut by_scene: BTreeMap<(&str, &str), [Option<bool>; 2]> = BTreeMap::new();
    for r in &report.rows {
        let slot = match r.approach {
            Approach::Physics => 0,
            Approach::Heuristic => 1,
        };
        by_scene.entry((&r.scene_id, &r.target_id)).or_default()[slot] = Some(r.success);
    }
    let mut out: Vec<String> = by_scene
        .into_iter()
        .filter(|(_, v)| v[0] == Some(true) && v[1] == Some(false))
        .map(|((s, _), _)| s.to_string())
        .collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn efficiency_matches_direct_evaluation() {
        assert_abs_diff_eq!(efficiency_improvement(56.16, 37.56).unwrap(), 49.52, epsilon = 0.01);
        assert_abs_diff_eq!(efficiency_improvement(64.08, 32.06).unwrap(), 99.88, epsilon = 0.01);
        assert_eq!(efficiency_improvement(3.0, 3.0).unwrap(), 0.0);
        assert!(matches!(efficiency_improvement(1.0, 0.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn structured_three_by_three_cubes() {
        let spec = CorpusSpec {
            boxes_per_scene: 9..=9,
            box_catalog: vec![[0.2, 0.2, 0.2]],
            ..CorpusSpec::new(CorpusKind::Structured, 1, 7)
        };
        let g = generate_scene(&spec, 0, &SimConfig::default()).unwrap();
        assert_eq!(g.scene.boxes.len(), 9);
        let mut heights: Vec<i64> = g.scene.boxes.iter().map(|b| (b.position.y * 100.0).round() as i64).collect();
        heights.sort();
        heights.dedup();
        assert_eq!(heights, vec![10, 30, 50]);
        assert!(g.scene.boxes.iter().all(|b| b.yaw == 0.0));
    }

    #[test]
    fn generation_is_deterministic_and_indexed() {
        let spec = CorpusSpec::new(CorpusKind::Unstructured, 2, 3);
        let cfg = SimConfig::default();
        let a = generate_scene(&spec, 1, &cfg).unwrap();
        let b = generate_scene(&spec, 1, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(matches!(generate_scene(&spec, 2, &cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn bad_catalog_rejected() {
        let mut spec = CorpusSpec::new(CorpusKind::Structured, 1, 0);
        spec.box_catalog.clear();
        assert!(spec.validate().is_err());
        spec.box_catalog = vec![[2.0, 2.0, 2.0]];
        assert!(spec.validate().is_err());
    }
}
