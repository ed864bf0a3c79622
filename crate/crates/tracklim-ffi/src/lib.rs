//! C ABI over the tracking-limit solvers.
//!
//! The interface is JSON-in / JSON-out: callers hand over a problem
//! description in the same format the CLI accepts and receive the full
//! report.  Strings returned through out-pointers are heap-allocated and
//! must be released with `tracklim_string_free`; strings borrowed from a
//! job handle live until the handle is freed or re-run.
//!
//! Every entry point catches panics and reports them as a status code, so
//! unwinding never crosses the language boundary.

#![warn(unsafe_op_in_unsafe_fn)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use tracklim::job::{run, JobConfig};
use tracklim::Error;

/// Result of a call.  `Validation` covers malformed problems (the input
/// should be fixed); `Solver` covers criteria that failed to converge or
/// verify (the report still lists per-criterion details when available).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracklimStatus {
    Ok = 0,
    NullArgument = 1,
    Validation = 2,
    Solver = 3,
    InvalidUtf8 = 4,
    InvalidJson = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let owned = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(owned));
}

fn status_of(err: &Error) -> TracklimStatus {
    if err.is_validation() {
        TracklimStatus::Validation
    } else {
        TracklimStatus::Solver
    }
}

/// A parsed problem plus, after a run, its report.
pub struct TracklimJob {
    config: JobConfig,
    report: Option<CString>,
}

fn run_config(job: &mut TracklimJob) -> TracklimStatus {
    let result = catch_unwind(AssertUnwindSafe(|| match run(&job.config) {
        Ok(outcome) => {
            let text = serde_json::to_string(&outcome.report).expect("report serializes");
            job.report = Some(CString::new(text).expect("JSON has no NUL bytes"));
            if outcome.all_verified() {
                TracklimStatus::Ok
            } else {
                let failed: Vec<String> = outcome
                    .report
                    .criteria
                    .iter()
                    .filter_map(|c| c.error.as_ref().map(|e| format!("{}: {e}", c.criterion)))
                    .collect();
                set_error(&failed.join("; "));
                TracklimStatus::Solver
            }
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }));
    result.unwrap_or_else(|_| {
        set_error("internal panic");
        TracklimStatus::Panic
    })
}

fn parse_config(text: &str) -> Result<Box<TracklimJob>, TracklimStatus> {
    match serde_json::from_str::<JobConfig>(text) {
        Ok(config) => Ok(Box::new(TracklimJob {
            config,
            report: None,
        })),
        Err(e) => {
            set_error(&format!("invalid configuration: {e}"));
            Err(TracklimStatus::InvalidJson)
        }
    }
}

/// Parse a JSON problem description into a job handle.
///
/// On success writes the new handle to `out` and returns `Ok`.  The handle
/// must be released with `tracklim_job_free`.
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string and `out` a valid
/// pointer to writable storage; both may be null (reported as a status).
#[no_mangle]
pub unsafe extern "C" fn tracklim_job_new(
    config_json: *const c_char,
    out: *mut *mut TracklimJob,
) -> TracklimStatus {
    if config_json.is_null() || out.is_null() {
        set_error("null argument");
        return TracklimStatus::NullArgument;
    }
    let bytes = unsafe { CStr::from_ptr(config_json) };
    let result = catch_unwind(|| {
        let text = match bytes.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("configuration is not valid UTF-8");
                return Err(TracklimStatus::InvalidUtf8);
            }
        };
        parse_config(text)
    });
    match result {
        Ok(Ok(job)) => {
            unsafe { *out = Box::into_raw(job) };
            TracklimStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            TracklimStatus::Panic
        }
    }
}

/// Solve every requested criterion and store the JSON report on the handle.
///
/// Returns `Ok` when all criteria verified; `Solver` when any criterion
/// recorded a failure (the stored report still describes all of them);
/// `Validation` when the problem itself is rejected.
///
/// # Safety
/// `job` must be null or a live handle from `tracklim_job_new`, not used
/// concurrently from another thread.
#[no_mangle]
pub unsafe extern "C" fn tracklim_job_run(job: *mut TracklimJob) -> TracklimStatus {
    match unsafe { job.as_mut() } {
        Some(job) => run_config(job),
        None => {
            set_error("null argument");
            TracklimStatus::NullArgument
        }
    }
}

/// Borrow the report stored by the most recent `tracklim_job_run` as JSON.
/// A report exists after both `Ok` and `Solver` outcomes.
///
/// Returns null if the job has not produced a report.  The pointer stays
/// valid until the job is re-run or freed.
///
/// # Safety
/// `job` must be null or a live handle from `tracklim_job_new`.
#[no_mangle]
pub unsafe extern "C" fn tracklim_job_report(job: *const TracklimJob) -> *const c_char {
    match unsafe { job.as_ref() } {
        Some(job) => job
            .report
            .as_ref()
            .map_or(std::ptr::null(), |r| r.as_ptr()),
        None => std::ptr::null(),
    }
}

/// Release a job handle.  Passing null is a no-op.
///
/// # Safety
/// `job` must be null or a live handle from `tracklim_job_new`; it must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tracklim_job_free(job: *mut TracklimJob) {
    if !job.is_null() {
        drop(unsafe { Box::from_raw(job) });
    }
}

/// One-shot convenience: parse, solve, and return the report in a single
/// call.  `report_out` receives a heap string (free with
/// `tracklim_string_free`); it is written for both `Ok` and `Solver`
/// outcomes, and left untouched otherwise.
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string and `report_out` a
/// valid pointer to writable storage; both may be null (reported as a
/// status).
#[no_mangle]
pub unsafe extern "C" fn tracklim_run_json(
    config_json: *const c_char,
    report_out: *mut *mut c_char,
) -> TracklimStatus {
    if report_out.is_null() {
        set_error("null argument");
        return TracklimStatus::NullArgument;
    }
    let mut job: *mut TracklimJob = std::ptr::null_mut();
    let status = unsafe { tracklim_job_new(config_json, &mut job) };
    if status != TracklimStatus::Ok {
        return status;
    }
    let job_ref = unsafe { &mut *job };
    let status = run_config(job_ref);
    if matches!(status, TracklimStatus::Ok | TracklimStatus::Solver) {
        if let Some(report) = job_ref.report.take() {
            unsafe { *report_out = report.into_raw() };
        }
    }
    unsafe { tracklim_job_free(job) };
    status
}

/// Release a string returned through an out-pointer.  Null is a no-op.
///
/// # Safety
/// `s` must be null or a string produced by this library; it must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tracklim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Message describing the most recent failure on this thread, or null.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn tracklim_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}
