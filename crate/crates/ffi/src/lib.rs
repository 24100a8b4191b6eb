//! C ABI over `parallel-cbf`.
//!
//! Every function returns a [`PcbfStatus`]; on failure a human-readable
//! message is available from [`pcbf_last_error_message`] on the same thread.
//! Scenarios and runs are opaque handles released with their `_free` function.
//! Panics never cross the boundary; they are reported as `PCBF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use parallel_cbf::backstepping::gain_lower_bound;
use parallel_cbf::barrier::{ConstraintSlab, ControlInput};
use parallel_cbf::config::parse_config;
use parallel_cbf::filter::{default_eps, solve_closed_form, ActiveBranch};
use parallel_cbf::sim::{run_built, EventKind, Scenario, SimEvent, Trajectory};
use parallel_cbf::trajectory::write_csv;
use parallel_cbf::CbfError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcbfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NumericalDomain = 4,
    Parameter = 5,
    InfeasibleSlab = 6,
    NotInterior = 7,
    OutOfRange = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcbfBranch {
    Nominal = 0,
    UpperClamped = 1,
    LowerClamped = 2,
    ZeroLg = 3,
}

impl From<ActiveBranch> for PcbfBranch {
    fn from(b: ActiveBranch) -> Self {
        match b {
            ActiveBranch::Nominal => PcbfBranch::Nominal,
            ActiveBranch::UpperClamped => PcbfBranch::UpperClamped,
            ActiveBranch::LowerClamped => PcbfBranch::LowerClamped,
            ActiveBranch::ZeroLg => PcbfBranch::ZeroLg,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcbfEvent {
    Completed = 0,
    SafetyViolation = 1,
    ControlBlowUp = 2,
    InfeasibleSlab = 3,
    CbfInvalidity = 4,
}

impl From<EventKind> for PcbfEvent {
    fn from(k: EventKind) -> Self {
        match k {
            EventKind::Completed => PcbfEvent::Completed,
            EventKind::SafetyViolation => PcbfEvent::SafetyViolation,
            EventKind::ControlBlowUp => PcbfEvent::ControlBlowUp,
            EventKind::InfeasibleSlab => PcbfEvent::InfeasibleSlab,
            EventKind::CbfInvalidity => PcbfEvent::CbfInvalidity,
        }
    }
}

/// Built scenario (system, barrier chain, filter settings).
pub struct PcbfScenario {
    inner: Scenario,
}

/// Finished simulation: trajectory plus terminating event.
pub struct PcbfRun {
    trajectory: Trajectory,
    event: SimEvent,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: PcbfStatus, msg: impl Into<String>) -> PcbfStatus {
    set_error(msg);
    status
}

fn from_error(e: CbfError) -> PcbfStatus {
    let status = match &e {
        CbfError::Config(_) => PcbfStatus::Config,
        CbfError::NumericalDomain(_) => PcbfStatus::NumericalDomain,
        CbfError::Usage(_) => PcbfStatus::InvalidArgument,
        CbfError::Parameter(_) => PcbfStatus::Parameter,
        CbfError::InfeasibleSlab { .. } => PcbfStatus::InfeasibleSlab,
        CbfError::NotInterior { .. } => PcbfStatus::NotInterior,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> PcbfStatus) -> PcbfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(PcbfStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(PcbfStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn pcbf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pcbf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Minimum-norm `u` with `lower <= a u <= upper`.
///
/// `a`, `u0` and `u_out` hold `m` doubles. `eps <= 0` selects the default
/// zero-authority threshold. `branch_out` and `correction_out` may be null.
///
/// # Safety
/// Pointers must be valid for `m` elements (or null where allowed).
#[no_mangle]
pub unsafe extern "C" fn pcbf_solve_closed_form(
    a: *const f64,
    m: usize,
    lower: f64,
    upper: f64,
    u0: *const f64,
    eps: f64,
    u_out: *mut f64,
    branch_out: *mut PcbfBranch,
    correction_out: *mut f64,
) -> PcbfStatus {
    guard(|| {
        non_null!(a, u0, u_out);
        if m == 0 {
            return fail(PcbfStatus::InvalidArgument, "m must be positive");
        }
        let slab = ConstraintSlab::from_slice(slice::from_raw_parts(a, m), lower, upper);
        let u0 = ControlInput::from_slice(slice::from_raw_parts(u0, m));
        let eps = if eps > 0.0 { eps } else { default_eps(&slab.a) };
        match solve_closed_form(&slab, &u0, eps) {
            Ok(r) => {
                slice::from_raw_parts_mut(u_out, m).copy_from_slice(r.u_star.as_slice());
                if !branch_out.is_null() {
                    *branch_out = r.active.into();
                }
                if !correction_out.is_null() {
                    *correction_out = r.correction_norm;
                }
                PcbfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// `max(-L_f h / h, L_f h / (b - h), 0)`; fails unless `0 < h < b`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pcbf_gain_lower_bound(h: f64, lf_h: f64, b: f64, out: *mut f64) -> PcbfStatus {
    guard(|| {
        non_null!(out);
        match gain_lower_bound(h, lf_h, b) {
            Ok(v) => {
                *out = v;
                PcbfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Builds a scenario from the text of a TOML scenario file.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pcbf_scenario_from_toml(toml: *const c_char, out: *mut *mut PcbfScenario) -> PcbfStatus {
    guard(|| {
        non_null!(toml, out);
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(toml).to_str() else {
            return fail(PcbfStatus::InvalidArgument, "scenario text is not UTF-8");
        };
        match parse_config(text, "<scenario>").and_then(|cfg| Scenario::new(&cfg)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(PcbfScenario { inner }));
                PcbfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `scenario` must come from [`pcbf_scenario_from_toml`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pcbf_scenario_free(scenario: *mut PcbfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulates the scenario to its horizon or first event.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pcbf_scenario_run(scenario: *const PcbfScenario, out: *mut *mut PcbfRun) -> PcbfStatus {
    guard(|| {
        non_null!(scenario, out);
        *out = ptr::null_mut();
        match run_built(&(*scenario).inner) {
            Ok((trajectory, event)) => {
                *out = Box::into_raw(Box::new(PcbfRun { trajectory, event }));
                PcbfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `run` must come from [`pcbf_scenario_run`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pcbf_run_free(run: *mut PcbfRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Terminating event and its time.
///
/// # Safety
/// `run` must be a live handle; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pcbf_run_event(run: *const PcbfRun, kind: *mut PcbfEvent, t_event: *mut f64) -> PcbfStatus {
    guard(|| {
        non_null!(run, kind, t_event);
        *kind = (*run).event.kind.into();
        *t_event = (*run).event.t_event;
        PcbfStatus::Ok
    })
}

/// Number of recorded samples; 0 for a null handle.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pcbf_run_len(run: *const PcbfRun) -> usize {
    if run.is_null() {
        0
    } else {
        (*run).trajectory.samples.len()
    }
}

/// State dimension, input dimension and number of barrier levels.
///
/// # Safety
/// `run` must be a live handle; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pcbf_run_dims(
    run: *const PcbfRun,
    state_dim: *mut usize,
    input_dim: *mut usize,
    levels: *mut usize,
) -> PcbfStatus {
    guard(|| {
        non_null!(run, state_dim, input_dim, levels);
        let t = &(*run).trajectory;
        *state_dim = t.state_names.len();
        *input_dim = t.input_names.len();
        *levels = t.levels;
        PcbfStatus::Ok
    })
}

/// Copies sample `index`. Any output may be null to skip it; array outputs must
/// hold the sizes reported by [`pcbf_run_dims`].
///
/// # Safety
/// `run` must be a live handle; non-null outputs must be valid for their sizes.
#[no_mangle]
pub unsafe extern "C" fn pcbf_run_sample(
    run: *const PcbfRun,
    index: usize,
    t: *mut f64,
    state: *mut f64,
    u_filtered: *mut f64,
    h: *mut f64,
    hbar: *mut f64,
) -> PcbfStatus {
    guard(|| {
        non_null!(run);
        let samples = &(*run).trajectory.samples;
        let Some(s) = samples.get(index) else {
            return fail(
                PcbfStatus::OutOfRange,
                format!("sample {index} out of range (len {})", samples.len()),
            );
        };
        if !t.is_null() {
            *t = s.t;
        }
        for (dst, src) in [(state, &s.state), (u_filtered, &s.u_filtered), (h, &s.h), (hbar, &s.hbar)] {
            if !dst.is_null() {
                slice::from_raw_parts_mut(dst, src.len()).copy_from_slice(src);
            }
        }
        PcbfStatus::Ok
    })
}

/// Writes the trajectory CSV to `path`.
///
/// # Safety
/// `run` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pcbf_run_write_csv(run: *const PcbfRun, path: *const c_char) -> PcbfStatus {
    guard(|| {
        non_null!(run, path);
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(PcbfStatus::InvalidArgument, "path is not UTF-8");
        };
        let file = match std::fs::File::create(path) {
            Ok(f) => f,
            Err(e) => return fail(PcbfStatus::Io, format!("{path}: {e}")),
        };
        match write_csv(&(*run).trajectory, std::io::BufWriter::new(file)) {
            Ok(()) => PcbfStatus::Ok,
            Err(e) => fail(PcbfStatus::Io, e.to_string()),
        }
    })
}
