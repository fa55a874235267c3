//! Removal monitoring: runs the extraction protocol on a world, records
//! what every other box did, and classifies the outcome.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{SimConfig, World};
use crate::reconstruct::{derive_seed, SceneSample};
use crate::scene::BoxId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollapseThresholds {
    /// m/s.
    pub linear_speed: f64,
    /// rad/s.
    pub angular_speed: f64,
    /// Net centroid travel over the window, m.
    pub displacement: f64,
    /// Consecutive over-speed steps needed to count.
    pub sustain_steps: u32,
}

impl Default for CollapseThresholds {
    fn default() -> Self {
        CollapseThresholds { linear_speed: 0.10, angular_speed: 0.50, displacement: 0.02, sustain_steps: 12 }
    }
}

impl CollapseThresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("linear_speed", self.linear_speed),
            ("angular_speed", self.angular_speed),
            ("displacement", self.displacement),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("threshold {name} must be positive, got {v}")));
            }
        }
        if self.sustain_steps == 0 {
            return Err(Error::InvalidConfig("sustain_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    Safe,
    MinorShift,
    Collapse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemovalOutcome {
    pub removed: BoxId,
    pub classification: Classification,
    /// In order of first threshold crossing.
    pub collapsed_boxes: Vec<BoxId>,
    pub first_collapsed: Option<BoxId>,
    /// Largest centroid distance from its starting point reached by each
    /// monitored box during the window, m.
    pub max_displacement: BTreeMap<BoxId, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Sample {
    position: Vector3<f64>,
    linear_speed: f64,
    angular_speed: f64,
}

/// Per-step kinematics of every box from the start of an extraction to the
/// end of the monitoring window.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    driven: BoxId,
    ids: Vec<BoxId>,
    /// Boxes already gone when recording started take no part.
    monitored: Vec<bool>,
    start: Vec<Vector3<f64>>,
    steps: Vec<Vec<Sample>>,
    /// Index into `steps` of the step on which the driven box left.
    cleared_at: Option<usize>,
    monitor_steps: usize,
    contact_slop: f64,
}

impl History {
    /// Starts recording from the world's current state. `driven` is the
    /// box whose extraction the history covers.
    pub fn begin(world: &World, driven: &BoxId) -> History {
        let bodies = world.bodies();
        History {
            driven: driven.clone(),
            ids: bodies.iter().map(|b| b.id.clone()).collect(),
            monitored: bodies.iter().map(|b| !b.removed && &b.id != driven).collect(),
            start: bodies.iter().map(|b| b.position).collect(),
            steps: Vec::new(),
            cleared_at: None,
            monitor_steps: world.config().steps_for(world.config().monitor_time),
            contact_slop: world.config().contact_slop,
        }
    }

    /// Appends the world's state after one step.
    pub fn record(&mut self, world: &World) {
        let row = world
            .bodies()
            .iter()
            .map(|b| Sample {
                position: b.position,
                linear_speed: b.linear_velocity.norm(),
                angular_speed: b.angular_velocity.norm(),
            })
            .collect();
        self.steps.push(row);
        if self.cleared_at.is_none() && !world.extraction_active() {
            self.cleared_at = Some(self.steps.len() - 1);
        }
    }

    /// Steps still needed before the window is complete.
    pub fn remaining(&self) -> Option<usize> {
        self.cleared_at.map(|c| (c + 1 + self.monitor_steps).saturating_sub(self.steps.len()))
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Classifies a completed history.
pub fn detect(history: &History, thresholds: &CollapseThresholds) -> Result<RemovalOutcome> {
    thresholds.validate()?;
    match history.remaining() {
        None => {
            return Err(Error::InsufficientHistory(format!(
                "`{}` never cleared the shelf in {} recorded steps",
                history.driven,
                history.steps.len()
            )))
        }
        Some(r) if r > 0 => return Err(Error::InsufficientHistory(format!("monitoring window is {r} steps short"))),
        Some(_) => {}
    }

    let sustain = thresholds.sustain_steps as usize;
    let mut crossings: Vec<(usize, f64, &BoxId)> = Vec::new();
    let mut max_displacement = BTreeMap::new();
    let mut shifted = false;
    let last = history.steps.len() - 1;
    for (i, id) in history.ids.iter().enumerate() {
        if !history.monitored[i] {
            continue;
        }
        let p0 = history.start[i];
        let mut run = 0usize;
        let mut crossing: Option<usize> = None;
        let mut first_far: Option<usize> = None;
        let mut peak: f64 = 0.0;
        for (t, row) in history.steps.iter().enumerate() {
            let s = &row[i];
            if s.linear_speed > thresholds.linear_speed || s.angular_speed > thresholds.angular_speed {
                run += 1;
                if run >= sustain && crossing.is_none() {
                    crossing = Some(t + 1 - run);
                }
            } else {
                run = 0;
            }
            let d = (s.position - p0).norm();
            peak = peak.max(d);
            if d > thresholds.displacement && first_far.is_none() {
                first_far = Some(t);
            }
        }
        let end = (history.steps[last][i].position - p0).norm();
        if crossing.is_none() && end > thresholds.displacement {
            crossing = first_far;
        }
        if let Some(t) = crossing {
            crossings.push((t, p0.y, id));
        } else if peak > history.contact_slop {
            shifted = true;
        }
        max_displacement.insert(id.clone(), peak);
    }
    crossings.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(b.2)));
    let collapsed_boxes: Vec<BoxId> = crossings.into_iter().map(|(_, _, id)| id.clone()).collect();
    let classification = if !collapsed_boxes.is_empty() {
        Classification::Collapse
    } else if shifted {
        Classification::MinorShift
    } else {
        Classification::Safe
    };
    Ok(RemovalOutcome {
        removed: history.driven.clone(),
        classification,
        first_collapsed: collapsed_boxes.first().cloned(),
        collapsed_boxes,
        max_displacement,
    })
}

/// Settles, extracts `id` under disturbance, monitors, and classifies.
/// Works on a copy of `world`; the copy in its final state is returned
/// alongside the outcome so callers can keep the removal applied.
pub fn run_removal(world: &World, id: &BoxId, thresholds: &CollapseThresholds) -> Result<(RemovalOutcome, World)> {
    run_removal_with(world, id, thresholds, |_| {})
}

/// As [`run_removal`], calling `observe` after every step.
pub fn run_removal_with(
    world: &World,
    id: &BoxId,
    thresholds: &CollapseThresholds,
    mut observe: impl FnMut(&World),
) -> Result<(RemovalOutcome, World)> {
    thresholds.validate()?;
    let mut w = world.clone();
    let body = w.body(id)?;
    if body.removed {
        return Err(Error::AlreadyRemoved(id.clone()));
    }
    let reach = body.half_extents.norm();
    let settle_steps = w.config().steps_for(w.config().settle_time);
    for _ in 0..settle_steps {
        w.step()?;
        observe(&w);
    }
    w.begin_extraction(id)?;
    let mut history = History::begin(&w, id);
    // The driven box moves at a constant speed, so this bounds the pull.
    let travel = w.shelf().depth + 2.0 * reach + 1.0;
    let max_pull = w.config().steps_for(travel / w.config().extraction_speed);
    while w.extraction_active() {
        if history.len() > max_pull {
            return Err(Error::InsufficientHistory(format!("`{id}` did not clear the shelf")));
        }
        w.inject_disturbance();
        w.step()?;
        history.record(&w);
        observe(&w);
    }
    while history.remaining().unwrap_or(0) > 0 {
        w.step()?;
        history.record(&w);
        observe(&w);
    }
    let outcome = detect(&history, thresholds)?;
    Ok((outcome, w))
}

/// Disturbance seed for the world built from one sample.
fn world_seed(cfg: &SimConfig, sample: &SceneSample) -> u64 {
    derive_seed(cfg.rng_seed, sample.sample_seed)
}

pub fn sample_world(sample: &SceneSample, cfg: &SimConfig) -> Result<World> {
    let mut world = World::new(&sample.scene, cfg.clone())?;
    world.reseed(world_seed(cfg, sample));
    Ok(world)
}

/// Removal protocol on one sample; the sample itself is not modified.
pub fn simulate_removal(
    sample: &SceneSample,
    id: &BoxId,
    cfg: &SimConfig,
    thresholds: &CollapseThresholds,
) -> Result<RemovalOutcome> {
    sample.scene.index_of(id)?;
    let world = sample_world(sample, cfg)?;
    Ok(run_removal(&world, id, thresholds)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregatedOutcome {
    pub per_sample: Vec<RemovalOutcome>,
    /// True only when every sample came out SAFE.
    pub safe: bool,
    pub collapse_union: BTreeSet<BoxId>,
    /// Most frequent first-collapsed box; ties go to the earliest sample.
    pub first_collapsed_mode: Option<BoxId>,
}

impl AggregatedOutcome {
    pub fn from_outcomes(per_sample: Vec<RemovalOutcome>) -> AggregatedOutcome {
        let safe = per_sample.iter().all(|o| o.classification == Classification::Safe);
        let collapse_union = per_sample.iter().flat_map(|o| o.collapsed_boxes.iter().cloned()).collect();
        let mut counts: BTreeMap<&BoxId, (usize, usize)> = BTreeMap::new();
        for (i, o) in per_sample.iter().enumerate() {
            if let Some(id) = &o.first_collapsed {
                counts.entry(id).or_insert((0, i)).0 += 1;
            }
        }
        let first_collapsed_mode =
            counts.into_iter().max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1))).map(|(id, _)| id.clone());
        AggregatedOutcome { per_sample, safe, collapse_union, first_collapsed_mode }
    }

    /// No sample collapsed, though some may have shifted slightly.
    pub fn collapse_free(&self) -> bool {
        self.per_sample.iter().all(|o| o.classification != Classification::Collapse)
    }

    /// Collapsed boxes across samples, most frequent first, then by first
    /// appearance.
    pub fn collapsed_by_frequency(&self) -> Vec<BoxId> {
        let mut counts: BTreeMap<&BoxId, (usize, usize)> = BTreeMap::new();
        let mut order = 0;
        for o in &self.per_sample {
            for id in &o.collapsed_boxes {
                let e = counts.entry(id).or_insert((0, order));
                e.0 += 1;
                order += 1;
            }
        }
        let mut v: Vec<_> = counts.into_iter().collect();
        v.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
        v.into_iter().map(|(id, _)| id.clone()).collect()
    }
}

/// The removal run on every world in parallel, results in input order.
pub fn run_removal_mc(
    worlds: &[World],
    id: &BoxId,
    thresholds: &CollapseThresholds,
) -> Result<(AggregatedOutcome, Vec<World>)> {
    if worlds.is_empty() {
        return Err(Error::InvalidInput("at least one sample is required".into()));
    }
    let results: Vec<Result<(RemovalOutcome, World)>> =
        worlds.par_iter().map(|w| run_removal(w, id, thresholds)).collect();
    let mut outcomes = Vec::with_capacity(worlds.len());
    let mut after = Vec::with_capacity(worlds.len());
    for (i, r) in results.into_iter().enumerate() {
        let (o, w) = r.map_err(|e| Error::in_sample(i, e))?;
        outcomes.push(o);
        after.push(w);
    }
    Ok((AggregatedOutcome::from_outcomes(outcomes), after))
}

pub fn simulate_removal_mc(
    samples: &[SceneSample],
    id: &BoxId,
    cfg: &SimConfig,
    thresholds: &CollapseThresholds,
) -> Result<AggregatedOutcome> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("at least one sample is required".into()));
    }
    let outcomes: Vec<Result<RemovalOutcome>> =
        samples.par_iter().map(|s| simulate_removal(s, id, cfg, thresholds)).collect();
    let per_sample = outcomes
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::in_sample(i, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregatedOutcome::from_outcomes(per_sample))
}
