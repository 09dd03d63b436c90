//! C ABI over the droidrepro engine.
//!
//! Every object crosses the boundary as an opaque pointer that the caller
//! releases with the matching `*_free` function. Fallible calls return a
//! [`DrStatus`]; on failure [`dr_last_error`] describes what went wrong on
//! the calling thread. Strings returned through out-parameters are owned by
//! the caller and released with [`dr_string_free`]. Actions and traces are
//! exchanged as JSON.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use droidrepro::device::{Device, SimApp, SimDevice, SnapshotId};
use droidrepro::gateway::{Gateway, MockBackend};
use droidrepro::orchestrator::{brute_force_oracle, replay, reproduce, OutcomeKind, ReproductionOutcome, SessionConfig};
use droidrepro::report::load_report;
use droidrepro::ui::{derive_actions, render_state, UIAction};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// A file could not be read or parsed.
    Load = 3,
    /// A JSON argument or configuration value was rejected.
    InvalidInput = 4,
    /// The device refused the operation.
    Device = 5,
    /// The oracle found no path to the bug.
    Unreachable = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrOutcomeKind {
    Success = 0,
    BudgetExceededActions = 1,
    BudgetExceededTime = 2,
    Exhausted = 3,
    Error = 4,
}

impl From<OutcomeKind> for DrOutcomeKind {
    fn from(kind: OutcomeKind) -> Self {
        match kind {
            OutcomeKind::Success => DrOutcomeKind::Success,
            OutcomeKind::BudgetExceededActions => DrOutcomeKind::BudgetExceededActions,
            OutcomeKind::BudgetExceededTime => DrOutcomeKind::BudgetExceededTime,
            OutcomeKind::Exhausted => DrOutcomeKind::Exhausted,
            OutcomeKind::Error => DrOutcomeKind::Error,
        }
    }
}

/// A loaded simulated app. Immutable and shareable between devices.
pub struct DrApp(Arc<SimApp>);

/// One device session. Not thread-safe; serialize calls on a handle.
pub struct DrDevice {
    device: SimDevice,
    snapshots: Vec<SnapshotId>,
}

/// The result of one reproduction session.
pub struct DrOutcome(ReproductionOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DrStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: DrStatus, message: impl Into<String>) -> FfiResult<T> {
    Err(Failure(status, message.into()))
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

/// Runs `body`, records any failure as the thread's last error and turns
/// panics into [`DrStatus::Panic`].
fn guard(body: impl FnOnce() -> FfiResult<()>) -> DrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            DrStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DrStatus::Panic
        }
    }
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> FfiResult<&'a str> {
    if ptr.is_null() {
        return fail(DrStatus::NullArgument, format!("{what} is null"));
    }
    CStr::from_ptr(ptr).to_str().or_else(|_| fail(DrStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> FfiResult<&'a T> {
    ptr.as_ref().map_or_else(|| fail(DrStatus::NullArgument, format!("{what} is null")), Ok)
}

unsafe fn handle_mut<'a, T>(ptr: *mut T, what: &str) -> FfiResult<&'a mut T> {
    ptr.as_mut().map_or_else(|| fail(DrStatus::NullArgument, format!("{what} is null")), Ok)
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return fail(DrStatus::NullArgument, format!("{what} is null"));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, value: String) -> FfiResult<()> {
    if out.is_null() {
        return fail(DrStatus::NullArgument, "output string pointer is null");
    }
    let c = CString::new(value).or_else(|_| fail(DrStatus::InvalidInput, "result contains a NUL byte"))?;
    out.write(c.into_raw());
    Ok(())
}

fn actions_json(actions: &[UIAction]) -> String {
    serde_json::to_string(actions).expect("actions serialize")
}

fn parse_actions(json: &str) -> FfiResult<Vec<UIAction>> {
    serde_json::from_str(json).or_else(|e| fail(DrStatus::InvalidInput, format!("bad action list: {e}")))
}

/// Message for the last failed call on this thread, or null after a
/// successful one. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn dr_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn dr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a simulated app description from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_app_load(path: *const c_char, out: *mut *mut DrApp) -> DrStatus {
    guard(|| {
        let path = text(path, "path")?;
        let app = SimApp::load(path).or_else(|e| fail(DrStatus::Load, format!("{path}: {e}")))?;
        put(out, Box::into_raw(Box::new(DrApp(Arc::new(app)))), "out")
    })
}

/// # Safety
/// `app` must come from [`dr_app_load`] and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dr_app_free(app: *mut DrApp) {
    if !app.is_null() {
        drop(Box::from_raw(app));
    }
}

/// Shortest action sequence reaching the bug, as a JSON action list.
/// `bug_id` may be null to use the app's ground-truth bug.
///
/// # Safety
/// Pointers must be valid; `bug_id` may be null.
#[no_mangle]
pub unsafe extern "C" fn dr_app_oracle(
    app: *const DrApp,
    bug_id: *const c_char,
    max_depth: u32,
    out_json: *mut *mut c_char,
) -> DrStatus {
    guard(|| {
        let app = &handle(app, "app")?.0;
        let bug = if bug_id.is_null() {
            match &app.ground_truth {
                Some(gt) => gt.bug_id.clone(),
                None => return fail(DrStatus::InvalidInput, "the app has no ground truth; pass a bug id"),
            }
        } else {
            text(bug_id, "bug_id")?.to_owned()
        };
        if app.bug(&bug).is_none() {
            return fail(DrStatus::InvalidInput, format!("unknown bug {bug:?}"));
        }
        match brute_force_oracle(app, &bug, max_depth as usize) {
            Some(path) => put_string(out_json, actions_json(&path)),
            None => fail(DrStatus::Unreachable, format!("no path to {bug} within {max_depth} actions")),
        }
    })
}

/// Opens a fresh device session on `app`. Returns null if `app` is null.
///
/// # Safety
/// `app` must be a live handle. The device keeps its own reference, so the
/// app may be freed first.
#[no_mangle]
pub unsafe extern "C" fn dr_device_new(app: *const DrApp) -> *mut DrDevice {
    match app.as_ref() {
        Some(app) => Box::into_raw(Box::new(DrDevice { device: SimDevice::new(app.0.clone()), snapshots: Vec::new() })),
        None => {
            set_error("app is null".into());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `device` must come from [`dr_device_new`] and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dr_device_free(device: *mut DrDevice) {
    if !device.is_null() {
        drop(Box::from_raw(device));
    }
}

/// Relaunches the app and clears any pending crash.
///
/// # Safety
/// `device` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dr_device_reset(device: *mut DrDevice) -> DrStatus {
    guard(|| {
        let d = handle_mut(device, "device")?;
        d.device.reset().map(drop).or_else(|e| fail(DrStatus::Device, e.to_string()))
    })
}

/// Textual description of the current screen.
///
/// # Safety
/// `device` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_device_screen(device: *mut DrDevice, out: *mut *mut c_char) -> DrStatus {
    guard(|| {
        let d = handle_mut(device, "device")?;
        let state = d.device.capture_screen().or_else(|e| fail(DrStatus::Device, e.to_string()))?;
        put_string(out, render_state(&state))
    })
}

/// Actions available on the current screen, as a JSON action list.
///
/// # Safety
/// `device` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_device_actions(device: *mut DrDevice, out_json: *mut *mut c_char) -> DrStatus {
    guard(|| {
        let d = handle_mut(device, "device")?;
        let state = d.device.capture_screen().or_else(|e| fail(DrStatus::Device, e.to_string()))?;
        put_string(out_json, actions_json(&derive_actions(&state)))
    })
}

/// Executes one JSON-encoded action. `crashed` receives 1 if the app
/// crashed; `crash_log` (may be null) receives the crash record or null.
///
/// # Safety
/// `device` must be a live handle, `action_json` a NUL-terminated string
/// and `crashed` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_device_execute(
    device: *mut DrDevice,
    action_json: *const c_char,
    crashed: *mut i32,
    crash_log: *mut *mut c_char,
) -> DrStatus {
    guard(|| {
        let d = handle_mut(device, "device")?;
        let json = text(action_json, "action_json")?;
        let action: UIAction =
            serde_json::from_str(json).or_else(|e| fail(DrStatus::InvalidInput, format!("bad action: {e}")))?;
        let step = d.device.execute(&action).or_else(|e| fail(DrStatus::Device, e.to_string()))?;
        put(crashed, i32::from(step.crashed), "crashed")?;
        if !crash_log.is_null() {
            match step.crash_record {
                Some(record) => put_string(crash_log, record)?,
                None => crash_log.write(ptr::null_mut()),
            }
        }
        Ok(())
    })
}

/// Saves the current position; `out` receives a token for [`dr_device_rollback`].
///
/// # Safety
/// `device` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_device_snapshot(device: *mut DrDevice, out: *mut u64) -> DrStatus {
    guard(|| {
        let d = handle_mut(device, "device")?;
        let id = d.device.snapshot().or_else(|e| fail(DrStatus::Device, e.to_string()))?;
        d.snapshots.push(id);
        put(out, (d.snapshots.len() - 1) as u64, "out")
    })
}

/// Restores a position saved by [`dr_device_snapshot`] on the same device.
///
/// # Safety
/// `device` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dr_device_rollback(device: *mut DrDevice, token: u64) -> DrStatus {
    guard(|| {
        let d = handle_mut(device, "device")?;
        let Some(&id) = usize::try_from(token).ok().and_then(|i| d.snapshots.get(i)) else {
            return fail(DrStatus::InvalidInput, format!("unknown snapshot token {token}"));
        };
        d.device.rollback(id).or_else(|e| fail(DrStatus::Device, e.to_string()))
    })
}

/// Replays a JSON action list from a reset and reports whether a bug
/// shows. `evidence` may be null.
///
/// # Safety
/// `device` must be a live handle, `trace_json` a NUL-terminated string and
/// `confirmed` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_device_replay(
    device: *mut DrDevice,
    trace_json: *const c_char,
    confirmed: *mut i32,
    evidence: *mut *mut c_char,
) -> DrStatus {
    guard(|| {
        let d = handle_mut(device, "device")?;
        let trace = parse_actions(text(trace_json, "trace_json")?)?;
        let result = replay(&trace, &mut d.device);
        put(confirmed, i32::from(result.confirmed), "confirmed")?;
        if !evidence.is_null() {
            put_string(evidence, result.evidence)?;
        }
        Ok(())
    })
}

/// Runs one reproduction session for the report at `report_path` on a fresh
/// device of `app`, answering model prompts from the mock script at
/// `mock_path`. Zero `max_actions` or `beam` selects the default.
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_reproduce(
    report_path: *const c_char,
    app: *const DrApp,
    mock_path: *const c_char,
    max_actions: u64,
    beam: u32,
    out: *mut *mut DrOutcome,
) -> DrStatus {
    guard(|| {
        let report_path = PathBuf::from(text(report_path, "report_path")?);
        let app = handle(app, "app")?.0.clone();
        let mock_path = text(mock_path, "mock_path")?;
        let report = load_report(&report_path).or_else(|e| fail(DrStatus::Load, e.to_string()))?;
        let backend = MockBackend::load(mock_path).or_else(|e| fail(DrStatus::Load, format!("{mock_path}: {e}")))?;
        let mut config = SessionConfig::default();
        if max_actions > 0 {
            config.max_actions = max_actions;
        }
        if beam > 0 {
            config.beam = beam as usize;
        }
        let gateway = Gateway::new(backend, config.prices);
        let outcome = reproduce(&report, SimDevice::new(app), &gateway, &config);
        put(out, Box::into_raw(Box::new(DrOutcome(outcome))), "out")
    })
}

/// # Safety
/// `outcome` must come from [`dr_reproduce`] and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dr_outcome_free(outcome: *mut DrOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// # Safety
/// `outcome` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dr_outcome_kind(outcome: *const DrOutcome) -> DrOutcomeKind {
    outcome.as_ref().map_or(DrOutcomeKind::Error, |o| o.0.outcome().into())
}

/// Device actions executed during the session, probes and replays included.
///
/// # Safety
/// `outcome` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dr_outcome_actions(outcome: *const DrOutcome) -> u64 {
    outcome.as_ref().map_or(0, |o| o.0.metrics.executed_actions)
}

/// The outcome document as JSON. Nonzero `normalize` zeroes wall times.
///
/// # Safety
/// `outcome` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_outcome_json(outcome: *const DrOutcome, normalize: i32, out_json: *mut *mut c_char) -> DrStatus {
    guard(|| {
        let o = &handle(outcome, "outcome")?.0;
        put_string(out_json, o.to_json("full", normalize != 0).to_string())
    })
}

/// The reproducing trace as a JSON action list, or null when the session
/// did not succeed.
///
/// # Safety
/// `outcome` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_outcome_trace(outcome: *const DrOutcome, out_json: *mut *mut c_char) -> DrStatus {
    guard(|| {
        let o = &handle(outcome, "outcome")?.0;
        match &o.trace {
            Some(trace) => put_string(out_json, actions_json(trace)),
            None => put(out_json, ptr::null_mut(), "out_json"),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_arguments_are_reported() {
        let mut app = ptr::null_mut();
        let status = unsafe { dr_app_load(ptr::null(), &mut app) };
        assert_eq!(status, DrStatus::NullArgument);
        let message = unsafe { CStr::from_ptr(dr_last_error()) }.to_str().unwrap();
        assert_eq!(message, "path is null");
        assert!(app.is_null());
        assert!(unsafe { dr_device_new(ptr::null()) }.is_null());
    }

    #[test]
    fn success_clears_the_last_error() {
        set_error("stale".into());
        let mut out = ptr::null_mut();
        let outcome = DrOutcome(ReproductionOutcome {
            report_id: "r".into(),
            spec: None,
            metrics: droidrepro::orchestrator::SessionMetrics {
                executed_actions: 3,
                ledger: droidrepro::gateway::UsageLedger::new(Default::default()),
                wall_time: std::time::Duration::ZERO,
                outcome: OutcomeKind::Exhausted,
                error: None,
            },
            trace: None,
            trace_summaries: None,
            evidence: None,
        });
        assert_eq!(unsafe { dr_outcome_trace(&outcome, &mut out) }, DrStatus::Ok);
        assert!(out.is_null());
        assert!(dr_last_error().is_null());
        assert_eq!(unsafe { dr_outcome_kind(&outcome) }, DrOutcomeKind::Exhausted);
        assert_eq!(unsafe { dr_outcome_actions(&outcome) }, 3);
    }

    #[test]
    fn interior_nul_in_message_is_replaced() {
        set_error("a\0b".into());
        let message = unsafe { CStr::from_ptr(dr_last_error()) }.to_str().unwrap();
        assert_eq!(message, "a b");
    }
}
