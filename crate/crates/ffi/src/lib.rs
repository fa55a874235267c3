//! C ABI over the planner.
//!
//! Objects cross the boundary as opaque handles created by `*_from_json`
//! or planner calls and released with the matching `*_free`. Every
//! fallible call returns an [`SpStatus`]; on failure the message is
//! available from [`sp_last_error_message`] on the same thread. Strings
//! handed out by the library are released with [`sp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stackpick::bench::efficiency_improvement;
use stackpick::collapse::CollapseThresholds;
use stackpick::physics::SimConfig;
use stackpick::planners::{self, ActionPlan};
use stackpick::reconstruct::ObservationSet;
use stackpick::scene::{BoxId, Scene};
use stackpick::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed JSON, bad UTF-8, or values outside their valid range.
    InvalidInput = 2,
    UnknownBox = 3,
    /// Extraction search exhausted without a collapse-free order.
    PlanNotFound = 4,
    /// Clearance stalled; the partial plan is still returned.
    PlanIncomplete = 5,
    /// The rigid-body engine diverged.
    Simulation = 6,
    Internal = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpApproach {
    Physics = 0,
    Heuristic = 1,
}

pub struct SpConfig {
    sim: SimConfig,
    thresholds: CollapseThresholds,
}

pub struct SpObservation(ObservationSet);

pub struct SpScene(Scene);

pub struct SpPlan(ActionPlan);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SpStatus {
    match e.root() {
        Error::UnknownBox(_) | Error::AlreadyRemoved(_) => SpStatus::UnknownBox,
        Error::PlanNotFound { .. } => SpStatus::PlanNotFound,
        Error::UnclearableResidue { .. } => SpStatus::PlanIncomplete,
        Error::SimulationExploded { .. } | Error::InsufficientHistory(_) => SpStatus::Simulation,
        Error::Io(_) => SpStatus::Internal,
        _ => SpStatus::InvalidInput,
    }
}

fn fail(e: Error) -> SpStatus {
    let status = status_of(&e);
    set_error(e.to_string());
    status
}

/// Runs `f`, turning panics into [`SpStatus::Panic`].
fn guard(f: impl FnOnce() -> SpStatus) -> SpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, SpStatus> {
    if p.is_null() {
        set_error(format!("`{name}` is null"));
        return Err(SpStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|e| {
        set_error(format!("`{name}` is not UTF-8: {e}"));
        SpStatus::InvalidInput
    })
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, SpStatus> {
    p.as_ref().ok_or_else(|| {
        set_error(format!("`{name}` is null"));
        SpStatus::NullPointer
    })
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<(), SpStatus> {
    if p.is_null() {
        set_error(format!("output `{name}` is null"));
        return Err(SpStatus::NullPointer);
    }
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! lib {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return fail(e),
        }
    };
}

/// Message of the last failed call on this thread, or null if none has
/// failed. Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated crate version.
#[no_mangle]
pub extern "C" fn sp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn sp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default engine settings and thresholds.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn sp_config_default(out: *mut *mut SpConfig) -> SpStatus {
    guard(|| {
        tri!(out_ptr(out, "out"));
        *out =
            Box::into_raw(Box::new(SpConfig { sim: SimConfig::default(), thresholds: CollapseThresholds::default() }));
        SpStatus::Ok
    })
}

/// Parses engine settings, with thresholds under `"thresholds"`. Missing
/// keys keep their defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn sp_config_from_json(json: *const c_char, out: *mut *mut SpConfig) -> SpStatus {
    guard(|| {
        let text = tri!(str_arg(json, "json"));
        tri!(out_ptr(out, "out"));
        let mut value: serde_json::Value = lib!(serde_json::from_str(text).map_err(Error::from));
        let thresholds = match value.as_object_mut().and_then(|o| o.remove("thresholds")) {
            Some(t) => lib!(serde_json::from_value::<CollapseThresholds>(t).map_err(Error::from)),
            None => CollapseThresholds::default(),
        };
        let sim: SimConfig = lib!(serde_json::from_value(value).map_err(Error::from));
        lib!(sim.validate());
        lib!(thresholds.validate());
        *out = Box::into_raw(Box::new(SpConfig { sim, thresholds }));
        SpStatus::Ok
    })
}

/// # Safety
/// `cfg` must come from this library and not have been freed. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn sp_config_free(cfg: *mut SpConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn sp_observation_from_json(json: *const c_char, out: *mut *mut SpObservation) -> SpStatus {
    guard(|| {
        let text = tri!(str_arg(json, "json"));
        tri!(out_ptr(out, "out"));
        let obs = lib!(ObservationSet::from_json(text));
        *out = Box::into_raw(Box::new(SpObservation(obs)));
        SpStatus::Ok
    })
}

/// # Safety
/// `obs` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn sp_observation_box_count(obs: *const SpObservation, out: *mut usize) -> SpStatus {
    guard(|| {
        let obs = tri!(handle(obs, "obs"));
        tri!(out_ptr(out, "out"));
        *out = obs.0.ids().len();
        SpStatus::Ok
    })
}

/// # Safety
/// `obs` must come from this library and not have been freed. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn sp_observation_free(obs: *mut SpObservation) {
    if !obs.is_null() {
        drop(Box::from_raw(obs));
    }
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn sp_scene_from_json(json: *const c_char, out: *mut *mut SpScene) -> SpStatus {
    guard(|| {
        let text = tri!(str_arg(json, "json"));
        tri!(out_ptr(out, "out"));
        let scene = lib!(Scene::from_json(text));
        *out = Box::into_raw(Box::new(SpScene(scene)));
        SpStatus::Ok
    })
}

/// The front-view observation a camera would record of `scene`.
///
/// # Safety
/// `scene` must be a live handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn sp_scene_observe(scene: *const SpScene, out: *mut *mut SpObservation) -> SpStatus {
    guard(|| {
        let scene = tri!(handle(scene, "scene"));
        tri!(out_ptr(out, "out"));
        *out = Box::into_raw(Box::new(SpObservation(ObservationSet::from_scene(&scene.0))));
        SpStatus::Ok
    })
}

/// # Safety
/// `scene` must come from this library and not have been freed. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn sp_scene_free(scene: *mut SpScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

unsafe fn config_or_default(cfg: *const SpConfig, fallback: &SpConfig) -> &SpConfig {
    cfg.as_ref().unwrap_or(fallback)
}

/// Plans the removals needed to take out `target`. `cfg` may be null for
/// defaults; `samples` is the number of depth hypotheses per rollout and
/// is ignored by the heuristic.
///
/// # Safety
/// `obs` must be a live handle, `cfg` a live handle or null, `target` a
/// NUL-terminated string, `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn sp_plan_extraction(
    obs: *const SpObservation,
    cfg: *const SpConfig,
    target: *const c_char,
    approach: SpApproach,
    samples: usize,
    out: *mut *mut SpPlan,
) -> SpStatus {
    guard(|| {
        let obs = tri!(handle(obs, "obs"));
        let target = BoxId::new(tri!(str_arg(target, "target")));
        tri!(out_ptr(out, "out"));
        let fallback = SpConfig { sim: SimConfig::default(), thresholds: CollapseThresholds::default() };
        let cfg = config_or_default(cfg, &fallback);
        let plan = lib!(match approach {
            SpApproach::Physics =>
                planners::plan_extraction_physics(&obs.0, &target, &cfg.sim, &cfg.thresholds, samples),
            SpApproach::Heuristic => planners::plan_extraction_heuristic(&obs.0, &target),
        });
        *out = Box::into_raw(Box::new(SpPlan(plan)));
        SpStatus::Ok
    })
}

/// Plans the removal of every box. When the physics-aware planner stalls
/// the partial plan is written to `out` and
/// [`SpStatus::PlanIncomplete`] is returned.
///
/// # Safety
/// As for [`sp_plan_extraction`].
#[no_mangle]
pub unsafe extern "C" fn sp_plan_clearance(
    obs: *const SpObservation,
    cfg: *const SpConfig,
    approach: SpApproach,
    samples: usize,
    out: *mut *mut SpPlan,
) -> SpStatus {
    guard(|| {
        let obs = tri!(handle(obs, "obs"));
        tri!(out_ptr(out, "out"));
        let fallback = SpConfig { sim: SimConfig::default(), thresholds: CollapseThresholds::default() };
        let cfg = config_or_default(cfg, &fallback);
        let result = match approach {
            SpApproach::Physics => planners::plan_clearance_physics(&obs.0, &cfg.sim, &cfg.thresholds, samples),
            SpApproach::Heuristic => planners::plan_clearance_heuristic(&obs.0),
        };
        match result {
            Ok(plan) => {
                *out = Box::into_raw(Box::new(SpPlan(plan)));
                SpStatus::Ok
            }
            Err(Error::UnclearableResidue { remaining, partial }) => {
                let e = Error::UnclearableResidue { remaining, partial: partial.clone() };
                *out = Box::into_raw(Box::new(SpPlan(*partial)));
                fail(e)
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn sp_plan_from_json(json: *const c_char, out: *mut *mut SpPlan) -> SpStatus {
    guard(|| {
        let text = tri!(str_arg(json, "json"));
        tri!(out_ptr(out, "out"));
        let plan = lib!(ActionPlan::from_json(text));
        *out = Box::into_raw(Box::new(SpPlan(plan)));
        SpStatus::Ok
    })
}

/// Writes a newly allocated JSON string; release it with [`sp_string_free`].
///
/// # Safety
/// `plan` must be a live handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn sp_plan_to_json(plan: *const SpPlan, out: *mut *mut c_char) -> SpStatus {
    guard(|| {
        let plan = tri!(handle(plan, "plan"));
        tri!(out_ptr(out, "out"));
        *out = to_c_string(plan.0.to_json());
        SpStatus::Ok
    })
}

/// Number of actions, or 0 for a null handle.
///
/// # Safety
/// `plan` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sp_plan_len(plan: *const SpPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `plan` must come from this library and not have been freed. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn sp_plan_free(plan: *mut SpPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Executes `plan` on the ground-truth `scene`. `success` receives whether
/// it ran without a collapse; `report_json`, if not null, receives the
/// execution report to release with [`sp_string_free`]. A collapse is a
/// successful call with `*success == false`.
///
/// # Safety
/// `scene` and `plan` must be live handles, `cfg` a live handle or null,
/// `success` valid for a write, `report_json` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn sp_validate_plan(
    scene: *const SpScene,
    plan: *const SpPlan,
    cfg: *const SpConfig,
    success: *mut bool,
    report_json: *mut *mut c_char,
) -> SpStatus {
    guard(|| {
        let scene = tri!(handle(scene, "scene"));
        let plan = tri!(handle(plan, "plan"));
        tri!(out_ptr(success, "success"));
        let fallback = SpConfig { sim: SimConfig::default(), thresholds: CollapseThresholds::default() };
        let cfg = config_or_default(cfg, &fallback);
        let report = lib!(planners::validate_plan(&scene.0, &plan.0, &cfg.sim, &cfg.thresholds));
        *success = report.success;
        if !report_json.is_null() {
            *report_json = to_c_string(lib!(serde_json::to_string(&report).map_err(Error::from)));
        }
        SpStatus::Ok
    })
}

/// Percentage by which the baseline time `t_bh` exceeds `t_pa`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn sp_efficiency_improvement(t_bh: f64, t_pa: f64, out: *mut f64) -> SpStatus {
    guard(|| {
        tri!(out_ptr(out, "out"));
        *out = lib!(efficiency_improvement(t_bh, t_pa));
        SpStatus::Ok
    })
}
