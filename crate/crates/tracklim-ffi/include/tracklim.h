#ifndef TRACKLIM_H
#define TRACKLIM_H

/* Generated by cbindgen from the tracklim-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a call.  `Validation` covers malformed problems (the input
// should be fixed); `Solver` covers criteria that failed to converge or
// verify (the report still lists per-criterion details when available).
typedef enum tracklim_status {
  TRACKLIM_STATUS_OK = 0,
  TRACKLIM_STATUS_NULL_ARGUMENT = 1,
  TRACKLIM_STATUS_VALIDATION = 2,
  TRACKLIM_STATUS_SOLVER = 3,
  TRACKLIM_STATUS_INVALID_UTF8 = 4,
  TRACKLIM_STATUS_INVALID_JSON = 5,
  TRACKLIM_STATUS_PANIC = 6,
} tracklim_status;

// A parsed problem plus, after a run, its report.
typedef struct tracklim_job tracklim_job;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parse a JSON problem description into a job handle.
//
// On success writes the new handle to `out` and returns `Ok`.  The handle
// must be released with `tracklim_job_free`.
//
// # Safety
// `config_json` must be a valid NUL-terminated string and `out` a valid
// pointer to writable storage; both may be null (reported as a status).
enum tracklim_status tracklim_job_new(const char *config_json, struct tracklim_job **out);

// Solve every requested criterion and store the JSON report on the handle.
//
// Returns `Ok` when all criteria verified; `Solver` when any criterion
// recorded a failure (the stored report still describes all of them);
// `Validation` when the problem itself is rejected.
//
// # Safety
// `job` must be null or a live handle from `tracklim_job_new`, not used
// concurrently from another thread.
enum tracklim_status tracklim_job_run(struct tracklim_job *job);

// Borrow the report stored by the most recent `tracklim_job_run` as JSON.
// A report exists after both `Ok` and `Solver` outcomes.
//
// Returns null if the job has not produced a report.  The pointer stays
// valid until the job is re-run or freed.
//
// # Safety
// `job` must be null or a live handle from `tracklim_job_new`.
const char *tracklim_job_report(const struct tracklim_job *job);

// Release a job handle.  Passing null is a no-op.
//
// # Safety
// `job` must be null or a live handle from `tracklim_job_new`; it must
// not be used afterwards.
void tracklim_job_free(struct tracklim_job *job);

// One-shot convenience: parse, solve, and return the report in a single
// call.  `report_out` receives a heap string (free with
// `tracklim_string_free`); it is written for both `Ok` and `Solver`
// outcomes, and left untouched otherwise.
//
// # Safety
// `config_json` must be a valid NUL-terminated string and `report_out` a
// valid pointer to writable storage; both may be null (reported as a
// status).
enum tracklim_status tracklim_run_json(const char *config_json, char **report_out);

// Release a string returned through an out-pointer.  Null is a no-op.
//
// # Safety
// `s` must be null or a string produced by this library; it must not be
// used afterwards.
void tracklim_string_free(char *s);

// Message describing the most recent failure on this thread, or null.
// Valid until the next call into the library from the same thread.
const char *tracklim_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRACKLIM_H */
