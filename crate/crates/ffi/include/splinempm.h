#ifndef SPLINEMPM_H
#define SPLINEMPM_H

#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum SmpmStatus {
  SMPM_STATUS_OK = 0,
  // Invalid scene, configuration or override.
  SMPM_STATUS_CONFIG = 1,
  // Fatal numerics during stepping; the simulation should be discarded.
  SMPM_STATUS_NUMERIC = 2,
  SMPM_STATUS_NULL_POINTER = 3,
  // Bad argument such as a short buffer or non-UTF-8 string.
  SMPM_STATUS_INVALID_ARGUMENT = 4,
  SMPM_STATUS_IO = 5,
  // Internal panic caught at the boundary.
  SMPM_STATUS_PANIC = 6,
} SmpmStatus;

// Projection selector for [`smpm_simulation_from_scene`].
typedef enum SmpmProjection {
  // The scene's default.
  SMPM_PROJECTION_DEFAULT = -1,
  SMPM_PROJECTION_OFF = 0,
  SMPM_PROJECTION_CONSTANTS = 1,
  SMPM_PROJECTION_PMINUS1 = 2,
} SmpmProjection;

// Opaque simulation handle.
typedef struct SmpmSimulation SmpmSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *smpm_version(void);

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next call into the library on this thread.
const char *smpm_last_error_message(void);

// Builds a named benchmark scene. `level` 0 and `degree` 0 select the
// scene defaults.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a writable pointer.
enum SmpmStatus smpm_simulation_from_scene(const char *name,
                                           uint32_t level,
                                           uint32_t degree,
                                           enum SmpmProjection projection,
                                           struct SmpmSimulation **out);

// Builds a simulation from a TOML scene description.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a writable pointer.
enum SmpmStatus smpm_simulation_from_config(const char *text, struct SmpmSimulation **out);

// Releases a handle. Null is accepted.
//
// # Safety
// `sim` must come from this library and not be used afterwards.
void smpm_simulation_free(struct SmpmSimulation *sim);

// Advances `steps` explicit steps with the scene's time step.
//
// # Safety
// `sim` must be a live handle.
enum SmpmStatus smpm_simulation_step(struct SmpmSimulation *sim, uint64_t steps);

// Runs to the scene's end time.
//
// # Safety
// `sim` must be a live handle.
enum SmpmStatus smpm_simulation_run(struct SmpmSimulation *sim);

// # Safety
// `sim` must be a live handle and `out` writable.
enum SmpmStatus smpm_simulation_particle_count(const struct SmpmSimulation *sim, uintptr_t *out);

// Simulated time and completed step count. Either output may be null.
//
// # Safety
// `sim` must be a live handle.
enum SmpmStatus smpm_simulation_time(const struct SmpmSimulation *sim,
                                     double *time,
                                     uint64_t *steps);

// Copies particle positions as `x0 y0 z0 x1 ...` into `buf` of `len` doubles.
//
// # Safety
// `sim` must be a live handle and `buf` valid for `len` writes.
enum SmpmStatus smpm_simulation_positions(const struct SmpmSimulation *sim,
                                          double *buf,
                                          uintptr_t len);

// Copies the particle hydrostatic stress `tr(σ)/3`, one per particle.
//
// # Safety
// `sim` must be a live handle and `buf` valid for `len` writes.
enum SmpmStatus smpm_simulation_hydrostatic_stress(const struct SmpmSimulation *sim,
                                                   double *buf,
                                                   uintptr_t len);

// Number of scalar metrics the scene reports.
//
// # Safety
// `sim` must be a live handle and `out` writable.
enum SmpmStatus smpm_simulation_metric_count(const struct SmpmSimulation *sim, uintptr_t *out);

// Name of metric `index` as a NUL-terminated string written to `buf`.
//
// # Safety
// `sim` must be a live handle and `buf` valid for `len` bytes.
enum SmpmStatus smpm_simulation_metric_name(const struct SmpmSimulation *sim,
                                            uintptr_t index,
                                            char *buf,
                                            uintptr_t len);

// Evaluates the scene metrics on the current state.
//
// # Safety
// `sim` must be a live handle and `buf` valid for `len` writes.
enum SmpmStatus smpm_simulation_metrics(const struct SmpmSimulation *sim,
                                        double *buf,
                                        uintptr_t len);

// Writes a particle snapshot CSV to `path`.
//
// # Safety
// `sim` must be a live handle and `path` a NUL-terminated string.
enum SmpmStatus smpm_simulation_write_snapshot(const struct SmpmSimulation *sim, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPLINEMPM_H */
