#ifndef PARALLEL_CBF_H
#define PARALLEL_CBF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PcbfStatus {
  PCBF_STATUS_OK = 0,
  PCBF_STATUS_NULL_POINTER = 1,
  PCBF_STATUS_INVALID_ARGUMENT = 2,
  PCBF_STATUS_CONFIG = 3,
  PCBF_STATUS_NUMERICAL_DOMAIN = 4,
  PCBF_STATUS_PARAMETER = 5,
  PCBF_STATUS_INFEASIBLE_SLAB = 6,
  PCBF_STATUS_NOT_INTERIOR = 7,
  PCBF_STATUS_OUT_OF_RANGE = 8,
  PCBF_STATUS_IO = 9,
  PCBF_STATUS_PANIC = 10,
} PcbfStatus;

typedef enum PcbfBranch {
  PCBF_BRANCH_NOMINAL = 0,
  PCBF_BRANCH_UPPER_CLAMPED = 1,
  PCBF_BRANCH_LOWER_CLAMPED = 2,
  PCBF_BRANCH_ZERO_LG = 3,
} PcbfBranch;

typedef enum PcbfEvent {
  PCBF_EVENT_COMPLETED = 0,
  PCBF_EVENT_SAFETY_VIOLATION = 1,
  PCBF_EVENT_CONTROL_BLOW_UP = 2,
  PCBF_EVENT_INFEASIBLE_SLAB = 3,
  PCBF_EVENT_CBF_INVALIDITY = 4,
} PcbfEvent;

// Finished simulation: trajectory plus terminating event.
typedef struct PcbfRun PcbfRun;

// Built scenario (system, barrier chain, filter settings).
typedef struct PcbfScenario PcbfScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the next call.
const char *pcbf_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *pcbf_version(void);

// Minimum-norm `u` with `lower <= a u <= upper`.
//
// `a`, `u0` and `u_out` hold `m` doubles. `eps <= 0` selects the default
// zero-authority threshold. `branch_out` and `correction_out` may be null.
//
// # Safety
// Pointers must be valid for `m` elements (or null where allowed).
enum PcbfStatus pcbf_solve_closed_form(const double *a,
                                       size_t m,
                                       double lower,
                                       double upper,
                                       const double *u0,
                                       double eps,
                                       double *u_out,
                                       enum PcbfBranch *branch_out,
                                       double *correction_out);

// `max(-L_f h / h, L_f h / (b - h), 0)`; fails unless `0 < h < b`.
//
// # Safety
// `out` must be a valid pointer.
enum PcbfStatus pcbf_gain_lower_bound(double h, double lf_h, double b, double *out);

// Builds a scenario from the text of a TOML scenario file.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum PcbfStatus pcbf_scenario_from_toml(const char *toml, struct PcbfScenario **out);

// # Safety
// `scenario` must come from [`pcbf_scenario_from_toml`] and not be used afterwards. Null is ignored.
void pcbf_scenario_free(struct PcbfScenario *scenario);

// Simulates the scenario to its horizon or first event.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum PcbfStatus pcbf_scenario_run(const struct PcbfScenario *scenario, struct PcbfRun **out);

// # Safety
// `run` must come from [`pcbf_scenario_run`] and not be used afterwards. Null is ignored.
void pcbf_run_free(struct PcbfRun *run);

// Terminating event and its time.
//
// # Safety
// `run` must be a live handle; outputs must be valid pointers.
enum PcbfStatus pcbf_run_event(const struct PcbfRun *run, enum PcbfEvent *kind, double *t_event);

// Number of recorded samples; 0 for a null handle.
//
// # Safety
// `run` must be a live handle or null.
size_t pcbf_run_len(const struct PcbfRun *run);

// State dimension, input dimension and number of barrier levels.
//
// # Safety
// `run` must be a live handle; outputs must be valid pointers.
enum PcbfStatus pcbf_run_dims(const struct PcbfRun *run,
                              size_t *state_dim,
                              size_t *input_dim,
                              size_t *levels);

// Copies sample `index`. Any output may be null to skip it; array outputs must
// hold the sizes reported by [`pcbf_run_dims`].
//
// # Safety
// `run` must be a live handle; non-null outputs must be valid for their sizes.
enum PcbfStatus pcbf_run_sample(const struct PcbfRun *run,
                                size_t index,
                                double *t,
                                double *state,
                                double *u_filtered,
                                double *h,
                                double *hbar);

// Writes the trajectory CSV to `path`.
//
// # Safety
// `run` must be a live handle and `path` a NUL-terminated string.
enum PcbfStatus pcbf_run_write_csv(const struct PcbfRun *run, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARALLEL_CBF_H */
