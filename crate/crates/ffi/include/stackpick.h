#ifndef STACKPICK_H
#define STACKPICK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpStatus {
  SP_STATUS_OK = 0,
  SP_STATUS_NULL_POINTER = 1,
  /**
   * Malformed JSON, bad UTF-8, or values outside their valid range.
   */
  SP_STATUS_INVALID_INPUT = 2,
  SP_STATUS_UNKNOWN_BOX = 3,
  /**
   * Extraction search exhausted without a collapse-free order.
   */
  SP_STATUS_PLAN_NOT_FOUND = 4,
  /**
   * Clearance stalled; the partial plan is still returned.
   */
  SP_STATUS_PLAN_INCOMPLETE = 5,
  /**
   * The rigid-body engine diverged.
   */
  SP_STATUS_SIMULATION = 6,
  SP_STATUS_INTERNAL = 7,
  SP_STATUS_PANIC = 8,
} SpStatus;

typedef enum SpApproach {
  SP_APPROACH_PHYSICS = 0,
  SP_APPROACH_HEURISTIC = 1,
} SpApproach;

typedef struct SpConfig SpConfig;

typedef struct SpObservation SpObservation;

typedef struct SpPlan SpPlan;

typedef struct SpScene SpScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none has
 * failed. Valid until the next failing call on the same thread.
 */
const char *sp_last_error_message(void);

/**
 * Static, NUL-terminated crate version.
 */
const char *sp_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed. Null is a no-op.
 */
void sp_string_free(char *s);

/**
 * Default engine settings and thresholds.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum SpStatus sp_config_default(struct SpConfig **out);

/**
 * Parses engine settings, with thresholds under `"thresholds"`. Missing
 * keys keep their defaults.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` valid for a pointer write.
 */
enum SpStatus sp_config_from_json(const char *json, struct SpConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not have been freed. Null is a no-op.
 */
void sp_config_free(struct SpConfig *cfg);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` valid for a pointer write.
 */
enum SpStatus sp_observation_from_json(const char *json, struct SpObservation **out);

/**
 * # Safety
 * `obs` must be a live handle; `out` valid for a write.
 */
enum SpStatus sp_observation_box_count(const struct SpObservation *obs, size_t *out);

/**
 * # Safety
 * `obs` must come from this library and not have been freed. Null is a no-op.
 */
void sp_observation_free(struct SpObservation *obs);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` valid for a pointer write.
 */
enum SpStatus sp_scene_from_json(const char *json, struct SpScene **out);

/**
 * The front-view observation a camera would record of `scene`.
 *
 * # Safety
 * `scene` must be a live handle; `out` valid for a pointer write.
 */
enum SpStatus sp_scene_observe(const struct SpScene *scene, struct SpObservation **out);

/**
 * # Safety
 * `scene` must come from this library and not have been freed. Null is a no-op.
 */
void sp_scene_free(struct SpScene *scene);

/**
 * Plans the removals needed to take out `target`. `cfg` may be null for
 * defaults; `samples` is the number of depth hypotheses per rollout and
 * is ignored by the heuristic.
 *
 * # Safety
 * `obs` must be a live handle, `cfg` a live handle or null, `target` a
 * NUL-terminated string, `out` valid for a pointer write.
 */
enum SpStatus sp_plan_extraction(const struct SpObservation *obs,
                                 const struct SpConfig *cfg,
                                 const char *target,
                                 enum SpApproach approach,
                                 size_t samples,
                                 struct SpPlan **out);

/**
 * Plans the removal of every box. When the physics-aware planner stalls
 * the partial plan is written to `out` and
 * [`SpStatus::PlanIncomplete`] is returned.
 *
 * # Safety
 * As for [`sp_plan_extraction`].
 */
enum SpStatus sp_plan_clearance(const struct SpObservation *obs,
                                const struct SpConfig *cfg,
                                enum SpApproach approach,
                                size_t samples,
                                struct SpPlan **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` valid for a pointer write.
 */
enum SpStatus sp_plan_from_json(const char *json, struct SpPlan **out);

/**
 * Writes a newly allocated JSON string; release it with [`sp_string_free`].
 *
 * # Safety
 * `plan` must be a live handle; `out` valid for a pointer write.
 */
enum SpStatus sp_plan_to_json(const struct SpPlan *plan, char **out);

/**
 * Number of actions, or 0 for a null handle.
 *
 * # Safety
 * `plan` must be a live handle or null.
 */
size_t sp_plan_len(const struct SpPlan *plan);

/**
 * # Safety
 * `plan` must come from this library and not have been freed. Null is a no-op.
 */
void sp_plan_free(struct SpPlan *plan);

/**
 * Executes `plan` on the ground-truth `scene`. `success` receives whether
 * it ran without a collapse; `report_json`, if not null, receives the
 * execution report to release with [`sp_string_free`]. A collapse is a
 * successful call with `*success == false`.
 *
 * # Safety
 * `scene` and `plan` must be live handles, `cfg` a live handle or null,
 * `success` valid for a write, `report_json` null or valid for a write.
 */
enum SpStatus sp_validate_plan(const struct SpScene *scene,
                               const struct SpPlan *plan,
                               const struct SpConfig *cfg,
                               bool *success,
                               char **report_json);

/**
 * Percentage by which the baseline time `t_bh` exceeds `t_pa`.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum SpStatus sp_efficiency_improvement(double t_bh, double t_pa, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STACKPICK_H */
