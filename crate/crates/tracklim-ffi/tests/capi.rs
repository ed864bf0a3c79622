//! Exercises the C entry points exactly as a foreign caller would: through
//! raw pointers, checking status codes, ownership, and the error channel.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use tracklim_ffi::{
    tracklim_job_free, tracklim_job_new, tracklim_job_report, tracklim_job_run,
    tracklim_last_error, tracklim_run_json, tracklim_string_free, TracklimJob, TracklimStatus,
};

const FIRST_ORDER: &str = r#"{
  "plant": {"num": [-2.0, 1.0], "den": [-1.0, 1.0]},
  "reference": {"num": [1.0], "den": [0.0, 1.0]},
  "criteria": ["os"], "skip_primal": true
}"#;

fn last_error_string() -> Option<String> {
    let p = tracklim_last_error();
    if p.is_null() {
        None
    } else {
        Some(unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
    }
}

#[test]
fn one_shot_run_returns_report() {
    let config = CString::new(FIRST_ORDER).unwrap();
    let mut report: *mut c_char = ptr::null_mut();
    let status = unsafe { tracklim_run_json(config.as_ptr(), &mut report) };
    assert_eq!(status, TracklimStatus::Ok);
    assert!(!report.is_null());
    let text = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_owned();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let dual = parsed["criteria"][0]["dual_value"].as_f64().unwrap();
    assert!((dual - 1.0).abs() < 5e-3, "dual {dual}");
    unsafe { tracklim_string_free(report) };
}

#[test]
fn handle_lifecycle_parse_run_report_free() {
    let config = CString::new(FIRST_ORDER).unwrap();
    let mut job: *mut TracklimJob = ptr::null_mut();
    unsafe {
        assert_eq!(
            tracklim_job_new(config.as_ptr(), &mut job),
            TracklimStatus::Ok
        );
        assert!(!job.is_null());
        // No report before the run.
        assert!(tracklim_job_report(job).is_null());
        assert_eq!(tracklim_job_run(job), TracklimStatus::Ok);
        let report = tracklim_job_report(job);
        assert!(!report.is_null());
        let text = CStr::from_ptr(report).to_str().unwrap();
        assert!(text.contains("\"criterion\":\"os\""));
        tracklim_job_free(job);
    }
}

#[test]
fn null_arguments_are_rejected_not_crashed() {
    let mut job: *mut TracklimJob = ptr::null_mut();
    let config = CString::new(FIRST_ORDER).unwrap();
    let mut out: *mut c_char = ptr::null_mut();
    unsafe {
        assert_eq!(
            tracklim_job_new(ptr::null(), &mut job),
            TracklimStatus::NullArgument
        );
        assert_eq!(
            tracklim_job_new(config.as_ptr(), ptr::null_mut()),
            TracklimStatus::NullArgument
        );
        assert_eq!(tracklim_job_run(ptr::null_mut()), TracklimStatus::NullArgument);
        assert!(tracklim_job_report(ptr::null()).is_null());
        tracklim_job_free(ptr::null_mut());
        tracklim_string_free(ptr::null_mut());
        assert_eq!(
            tracklim_run_json(ptr::null(), &mut out),
            TracklimStatus::NullArgument
        );
    }
    assert!(out.is_null());
}

#[test]
fn malformed_inputs_map_to_distinct_statuses() {
    let mut job: *mut TracklimJob = ptr::null_mut();

    let not_utf8 = CString::new(&b"\xff\xfe{}"[..]).unwrap();
    assert_eq!(
        unsafe { tracklim_job_new(not_utf8.as_ptr(), &mut job) },
        TracklimStatus::InvalidUtf8
    );

    let not_json = CString::new("{oops").unwrap();
    assert_eq!(
        unsafe { tracklim_job_new(not_json.as_ptr(), &mut job) },
        TracklimStatus::InvalidJson
    );
    assert!(last_error_string().unwrap().contains("invalid configuration"));
}

#[test]
fn validation_failures_surface_through_run() {
    // Improper plant: parses as JSON, rejected when the problem is built.
    let config = CString::new(
        r#"{"plant": {"num": [1.0, 0.0, 1.0], "den": [1.0, 1.0]},
            "reference": {"num": [1.0], "den": [0.0, 1.0]}}"#,
    )
    .unwrap();
    let mut report: *mut c_char = ptr::null_mut();
    let status = unsafe { tracklim_run_json(config.as_ptr(), &mut report) };
    assert_eq!(status, TracklimStatus::Validation);
    assert!(report.is_null());
    assert!(last_error_string().unwrap().contains("improper"));
}

#[test]
fn per_criterion_failure_still_delivers_report() {
    // Negative reference trips the undershoot criterion during the solve.
    let config = CString::new(
        r#"{"plant": {"num": [-1.0, 1.0], "den": [-2.0, 1.0]},
            "reference": {"num": [3.0, -1.0], "den": [0.0, 1.0, 1.0]},
            "criteria": ["us"], "skip_primal": true}"#,
    )
    .unwrap();
    let mut report: *mut c_char = ptr::null_mut();
    let status = unsafe { tracklim_run_json(config.as_ptr(), &mut report) };
    assert_eq!(status, TracklimStatus::Solver);
    assert!(!report.is_null());
    let text = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_owned();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(parsed["criteria"][0]["error"].as_str().is_some());
    unsafe { tracklim_string_free(report) };
    assert!(last_error_string().unwrap().contains("us"));
}
