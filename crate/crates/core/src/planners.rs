//! Removal-sequence planners and the ground-truth plan validator.
//!
//! The physics planners test candidate removals on depth-randomized
//! samples of the observed scene; the heuristics only sort by height.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::collapse::{
    run_removal, run_removal_mc, AggregatedOutcome, Classification, CollapseThresholds, RemovalOutcome,
};
use crate::error::{Error, Result};
use crate::physics::{SimConfig, World};
use crate::reconstruct::{sample_batch, ObservationSet};
use crate::scene::{self, BoxId, Scene, SCHEMA_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Physics,
    Heuristic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Extract,
    Clear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedAction {
    pub box_id: BoxId,
    /// Absent for heuristic plans, which consult no simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_safe: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<AggregatedOutcome>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    /// Removal simulations the plan required, counting cached rollouts.
    pub simulations_run: usize,
    /// Depth samples per rollout.
    #[serde(default)]
    pub samples: usize,
    /// Sweeps made by the clearance planner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passes: Option<usize>,
    /// Wall-clock planning time, only recorded on request so plan files
    /// stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planning_time_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionPlan {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub approach: Approach,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<BoxId>,
    pub actions: Vec<PlannedAction>,
    #[serde(default)]
    pub stats: PlanStats,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl ActionPlan {
    pub fn ids(&self) -> Vec<BoxId> {
        self.actions.iter().map(|a| a.box_id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn from_json(text: &str) -> Result<ActionPlan> {
        let plan: ActionPlan = serde_json::from_str(text)?;
        scene::check_schema_version(plan.schema_version)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for a in &self.actions {
            if !seen.insert(&a.box_id) {
                return Err(Error::InvalidInput(format!("box `{}` appears twice in the plan", a.box_id)));
            }
        }
        if self.task == Task::Extract {
            match (&self.target, self.actions.last()) {
                (Some(t), Some(last)) if &last.box_id == t => {}
                (None, _) => return Err(Error::InvalidInput("extraction plan has no target".into())),
                _ => return Err(Error::InvalidInput("extraction plan must end with its target".into())),
            }
        }
        Ok(())
    }

    fn heuristic(task: Task, target: Option<BoxId>, ids: Vec<BoxId>) -> ActionPlan {
        ActionPlan {
            schema_version: SCHEMA_VERSION,
            approach: Approach::Heuristic,
            task,
            target,
            actions: ids
                .into_iter()
                .map(|box_id| PlannedAction { box_id, predicted_safe: None, predicted: None })
                .collect(),
            stats: PlanStats::default(),
        }
    }
}

/// Observed boxes from highest to lowest centroid, ties by `x`, then id.
pub fn height_order(obs: &ObservationSet) -> Result<Vec<BoxId>> {
    let mut rects = obs.front_rects()?;
    rects.sort_by(|a, b| {
        b.1.center.y.total_cmp(&a.1.center.y).then(a.1.center.x.total_cmp(&b.1.center.x)).then(a.0.cmp(&b.0))
    });
    Ok(rects.into_iter().map(|r| r.0).collect())
}

pub fn plan_extraction_heuristic(obs: &ObservationSet, target: &BoxId) -> Result<ActionPlan> {
    let order = height_order(obs)?;
    let pos = order.iter().position(|id| id == target).ok_or_else(|| Error::UnknownBox(target.clone()))?;
    Ok(ActionPlan::heuristic(Task::Extract, Some(target.clone()), order[..=pos].to_vec()))
}

pub fn plan_clearance_heuristic(obs: &ObservationSet) -> Result<ActionPlan> {
    Ok(ActionPlan::heuristic(Task::Clear, None, height_order(obs)?))
}

struct Rollout {
    outcome: AggregatedOutcome,
    worlds: Vec<World>,
}

/// Physics-aware planning over one observation. Rollouts are cached by
/// (applied prefix, attempted box), so several targets on the same scene
/// share work.
pub struct PhysicsPlanner {
    thresholds: CollapseThresholds,
    ids: Vec<BoxId>,
    base: Vec<World>,
    cache: BTreeMap<(Vec<BoxId>, BoxId), Rollout>,
}

impl PhysicsPlanner {
    /// Draws `k` depth samples seeded from `cfg.rng_seed`.
    pub fn new(
        obs: &ObservationSet,
        cfg: &SimConfig,
        thresholds: &CollapseThresholds,
        k: usize,
    ) -> Result<PhysicsPlanner> {
        thresholds.validate()?;
        let samples = sample_batch(obs, cfg, cfg.rng_seed, k)?;
        let base = samples.iter().map(|s| crate::collapse::sample_world(s, cfg)).collect::<Result<Vec<_>>>()?;
        Ok(PhysicsPlanner { thresholds: thresholds.clone(), ids: obs.ids(), base, cache: BTreeMap::new() })
    }

    pub fn samples(&self) -> usize {
        self.base.len()
    }

    fn check(&self, id: &BoxId) -> Result<()> {
        if self.ids.contains(id) {
            Ok(())
        } else {
            Err(Error::UnknownBox(id.clone()))
        }
    }

    fn worlds_after(&mut self, prefix: &[BoxId]) -> Result<Vec<World>> {
        match prefix.split_last() {
            None => Ok(self.base.clone()),
            Some((last, head)) => {
                self.rollout(head, last)?;
                Ok(self.cache[&(head.to_vec(), last.clone())].worlds.clone())
            }
        }
    }

    /// Outcome of removing `id` after `prefix` has been applied.
    pub fn rollout(&mut self, prefix: &[BoxId], id: &BoxId) -> Result<AggregatedOutcome> {
        let key = (prefix.to_vec(), id.clone());
        if let Some(r) = self.cache.get(&key) {
            return Ok(r.outcome.clone());
        }
        let worlds = self.worlds_after(prefix)?;
        let (outcome, worlds) = run_removal_mc(&worlds, id, &self.thresholds)?;
        self.cache.insert(key, Rollout { outcome: outcome.clone(), worlds });
        Ok(outcome)
    }

    /// Backtracking single-box extraction. A removal is accepted when no
    /// sample collapses; on a collapse the first box to fall becomes the
    /// next candidate, since it must come out before the blocked removal.
    pub fn extract(&mut self, target: &BoxId) -> Result<ActionPlan> {
        self.check(target)?;
        let k = self.base.len();
        let n = self.ids.len();
        let budget = n * n * k;
        let mut plan: Vec<PlannedAction> = Vec::new();
        let mut prefix: Vec<BoxId> = Vec::new();
        let mut attempted: BTreeSet<(BTreeSet<BoxId>, BoxId)> = BTreeSet::new();
        let mut trace: Vec<(Vec<BoxId>, BoxId)> = Vec::new();
        let mut sims = 0;
        let mut next = target.clone();
        loop {
            let removed: BTreeSet<BoxId> = prefix.iter().cloned().collect();
            if sims + k > budget {
                return Err(Error::PlanNotFound { reason: format!("simulation budget of {budget} exhausted"), trace });
            }
            attempted.insert((removed.clone(), next.clone()));
            trace.push((prefix.clone(), next.clone()));
            let outcome = self.rollout(&prefix, &next)?;
            sims += k;
            if outcome.collapse_free() {
                prefix.push(next.clone());
                plan.push(PlannedAction { box_id: next.clone(), predicted_safe: Some(true), predicted: Some(outcome) });
                if &next == target {
                    return Ok(ActionPlan {
                        schema_version: SCHEMA_VERSION,
                        approach: Approach::Physics,
                        task: Task::Extract,
                        target: Some(target.clone()),
                        actions: plan,
                        stats: PlanStats { simulations_run: sims, samples: k, passes: None, planning_time_s: None },
                    });
                }
                next = target.clone();
                continue;
            }
            let candidates = outcome.first_collapsed_mode.iter().cloned().chain(outcome.collapsed_by_frequency());
            let mut chosen = None;
            for c in candidates {
                if removed.contains(&c) || attempted.contains(&(removed.clone(), c.clone())) {
                    continue;
                }
                chosen = Some(c);
                break;
            }
            match chosen {
                Some(c) => next = c,
                None => {
                    return Err(Error::PlanNotFound {
                        reason: format!(
                            "every box that collapses when `{next}` is removed has already been tried after [{}]",
                            prefix.iter().map(BoxId::as_str).collect::<Vec<_>>().join(", ")
                        ),
                        trace,
                    })
                }
            }
        }
    }

    /// Multi-pass clearance in observation order. Only removals that leave
    /// every sample SAFE are kept; anything else is skipped for the pass
    /// and retried on the next one.
    pub fn clear(&mut self) -> Result<ActionPlan> {
        let k = self.base.len();
        let mut remaining = self.ids.clone();
        let mut prefix: Vec<BoxId> = Vec::new();
        let mut plan: Vec<PlannedAction> = Vec::new();
        let mut sims = 0;
        let mut passes = 0;
        while !remaining.is_empty() {
            passes += 1;
            let mut skipped = Vec::new();
            let mut progress = false;
            for id in remaining {
                let outcome = self.rollout(&prefix, &id)?;
                sims += k;
                if outcome.safe {
                    prefix.push(id.clone());
                    plan.push(PlannedAction { box_id: id, predicted_safe: Some(true), predicted: Some(outcome) });
                    progress = true;
                } else {
                    skipped.push(id);
                }
            }
            remaining = skipped;
            if !progress {
                let partial = ActionPlan {
                    schema_version: SCHEMA_VERSION,
                    approach: Approach::Physics,
                    task: Task::Clear,
                    target: None,
                    actions: plan,
                    stats: PlanStats { simulations_run: sims, samples: k, passes: Some(passes), planning_time_s: None },
                };
                return Err(Error::UnclearableResidue { remaining, partial: Box::new(partial) });
            }
        }
        Ok(ActionPlan {
            schema_version: SCHEMA_VERSION,
            approach: Approach::Physics,
            task: Task::Clear,
            target: None,
            actions: plan,
            stats: PlanStats { simulations_run: sims, samples: k, passes: Some(passes), planning_time_s: None },
        })
    }
}

pub fn plan_extraction_physics(
    obs: &ObservationSet,
    target: &BoxId,
    cfg: &SimConfig,
    thresholds: &CollapseThresholds,
    k: usize,
) -> Result<ActionPlan> {
    if !obs.contains(target) {
        return Err(Error::UnknownBox(target.clone()));
    }
    PhysicsPlanner::new(obs, cfg, thresholds, k)?.extract(target)
}

pub fn plan_clearance_physics(
    obs: &ObservationSet,
    cfg: &SimConfig,
    thresholds: &CollapseThresholds,
    k: usize,
) -> Result<ActionPlan> {
    if obs.boxes.is_empty() {
        return Err(Error::InvalidInput("nothing to clear: the observation has no boxes".into()));
    }
    PhysicsPlanner::new(obs, cfg, thresholds, k)?.clear()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub success: bool,
    /// Picks executed, including one that caused a collapse.
    pub boxes_removed: usize,
    pub collapsed_during_execution: BTreeSet<BoxId>,
    /// The pick during which the collapse happened.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_action: Option<BoxId>,
    /// s, from the per-pick cost model.
    pub estimated_time: f64,
    pub outcomes: Vec<RemovalOutcome>,
}

enum Step {
    Done(Box<World>),
    Collapsed,
}

/// Executes plans against a ground-truth scene. Prefixes already executed
/// are remembered, so validating many plans on one scene shares work.
pub struct Validator {
    cfg: SimConfig,
    thresholds: CollapseThresholds,
    truth: Scene,
    base: World,
    cache: BTreeMap<Vec<BoxId>, (RemovalOutcome, Step)>,
}

impl Validator {
    pub fn new(truth: &Scene, cfg: &SimConfig, thresholds: &CollapseThresholds) -> Result<Validator> {
        thresholds.validate()?;
        Ok(Validator {
            cfg: cfg.clone(),
            thresholds: thresholds.clone(),
            truth: truth.clone(),
            base: World::new(truth, cfg.clone())?,
            cache: BTreeMap::new(),
        })
    }

    fn world_after(&mut self, prefix: &[BoxId]) -> Result<Option<World>> {
        if prefix.is_empty() {
            return Ok(Some(self.base.clone()));
        }
        self.execute(prefix)?;
        Ok(match &self.cache[prefix].1 {
            Step::Done(w) => Some(World::clone(w)),
            Step::Collapsed => None,
        })
    }

    fn execute(&mut self, prefix: &[BoxId]) -> Result<()> {
        if self.cache.contains_key(prefix) {
            return Ok(());
        }
        let (last, head) = prefix.split_last().expect("non-empty prefix");
        let Some(world) = self.world_after(head)? else {
            return Err(Error::InvalidInput("cannot continue past a collapse".into()));
        };
        let (outcome, after) = run_removal(&world, last, &self.thresholds)?;
        let step = if outcome.classification == Classification::Collapse {
            Step::Collapsed
        } else {
            Step::Done(Box::new(after))
        };
        self.cache.insert(prefix.to_vec(), (outcome, step));
        Ok(())
    }

    pub fn validate(&mut self, plan: &ActionPlan) -> Result<ExecutionReport> {
        let ids = plan.ids();
        let mut seen = BTreeSet::new();
        for id in &ids {
            let b = self.truth.get(id).ok_or_else(|| Error::UnknownBox(id.clone()))?;
            if b.removed {
                return Err(Error::AlreadyRemoved(id.clone()));
            }
            if !seen.insert(id) {
                return Err(Error::InvalidInput(format!("box `{id}` appears twice in the plan")));
            }
        }
        let mut outcomes = Vec::new();
        let mut collapsed = BTreeSet::new();
        let mut failed_action = None;
        for i in 1..=ids.len() {
            let prefix = &ids[..i];
            self.execute(prefix)?;
            let (outcome, step) = &self.cache[prefix];
            outcomes.push(outcome.clone());
            if let Step::Collapsed = step {
                collapsed.extend(outcome.collapsed_boxes.iter().cloned());
                failed_action = Some(ids[i - 1].clone());
                break;
            }
        }
        let executed = outcomes.len();
        Ok(ExecutionReport {
            schema_version: SCHEMA_VERSION,
            success: failed_action.is_none(),
            boxes_removed: executed,
            collapsed_during_execution: collapsed,
            failed_action,
            estimated_time: executed as f64 * self.cfg.per_pick_cost,
            outcomes,
        })
    }
}

/// Runs `plan` on the ground truth, stopping at the first collapse.
pub fn validate_plan(
    truth: &Scene,
    plan: &ActionPlan,
    cfg: &SimConfig,
    thresholds: &CollapseThresholds,
) -> Result<ExecutionReport> {
    Validator::new(truth, cfg, thresholds)?.validate(plan)
}
