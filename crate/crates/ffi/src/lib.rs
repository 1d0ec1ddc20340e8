//! C ABI for the investment-timing solver: an opaque solver handle built
//! from the same JSON config the CLI takes, plus evaluators for the
//! boundary, the value surface, and the Monte Carlo estimators.
//!
//! All functions return [`MsStatus`]; outputs go through out-pointers. A
//! thread-local message for the last error can be fetched with
//! [`ms_last_error`]. Handles are not thread-safe for concurrent mutation
//! but all operations are read-only after construction, so sharing a
//! handle across threads for evaluation is fine.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use maxstop::boundary::{self, FreeBoundary};
use maxstop::config::ProblemConfig;
use maxstop::sim::{self, SimConfig, StoppingPolicy};
use maxstop::value::{Side, ValueSurface};
use maxstop::{Error, Instance};

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    SolverFailure = 3,
    Utf8 = 4,
    Panic = 5,
}

fn status_of(err: &Error) -> MsStatus {
    match err.exit_code() {
        2 => MsStatus::InvalidInput,
        _ => MsStatus::SolverFailure,
    }
}

/// Opaque solver handle: a solved instance plus its value surface.
pub struct MsSolver {
    inst: Instance,
    boundary: FreeBoundary,
    surface: ValueSurface,
}

/// Simulation output.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MsSimResult {
    pub estimate: f64,
    pub std_error: f64,
    pub n_stopped: u64,
    pub n_truncated: u64,
    pub truncation_bound: f64,
}

/// Region labels returned by `ms_region`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsRegion {
    Stop = 0,
    LeftOfStop = 1,
    RightOfStop = 2,
    BelowMlow = 3,
}

fn guarded<F: FnOnce() -> MsStatus>(f: F) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            MsStatus::Panic
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ms_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the last error message (UTF-8, NUL-terminated, truncated to `len`)
/// into `buf`; returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to `len` writable bytes (or be null to query the size).
#[no_mangle]
pub unsafe extern "C" fn ms_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Build a solver from a JSON problem config (same schema as the CLI) and
/// solve the free boundary.
///
/// # Safety
/// `config_json` must be a NUL-terminated UTF-8 string; `out` must be a
/// valid pointer. On success `*out` owns the solver and must be released
/// with [`ms_solver_free`].
#[no_mangle]
pub unsafe extern "C" fn ms_solver_new(
    config_json: *const c_char,
    out: *mut *mut MsSolver,
) -> MsStatus {
    if config_json.is_null() || out.is_null() {
        set_error("null pointer");
        return MsStatus::NullPointer;
    }
    let text = match CStr::from_ptr(config_json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("config is not valid UTF-8");
            return MsStatus::Utf8;
        }
    };
    guarded(|| {
        let build = || -> Result<MsSolver, Error> {
            let cfg = ProblemConfig::from_json(text)?;
            let inst = cfg.build_instance()?;
            let fb = boundary::find_endpoint(&inst, &cfg.solver_config())?;
            let surface = ValueSurface::new(inst.clone(), fb.clone());
            Ok(MsSolver {
                inst,
                boundary: fb,
                surface,
            })
        };
        match build() {
            Ok(solver) => {
                *out = Box::into_raw(Box::new(solver));
                MsStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Release a solver handle.
///
/// # Safety
/// `solver` must be a pointer returned by [`ms_solver_new`] that has not
/// been freed yet, or null.
#[no_mangle]
pub unsafe extern "C" fn ms_solver_free(solver: *mut MsSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

unsafe fn eval1(
    solver: *const MsSolver,
    out: *mut f64,
    f: impl FnOnce(&MsSolver) -> Result<f64, Error>,
) -> MsStatus {
    if solver.is_null() || out.is_null() {
        set_error("null pointer");
        return MsStatus::NullPointer;
    }
    guarded(|| match f(&*solver) {
        Ok(v) => {
            *out = v;
            MsStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    })
}

/// Endpoint m̲ of the stopping region.
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_m_low(solver: *const MsSolver, out: *mut f64) -> MsStatus {
    eval1(solver, out, |s| Ok(s.boundary.m_low()))
}

/// Stand-alone threshold x_R.
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_x_r(solver: *const MsSolver, out: *mut f64) -> MsStatus {
    eval1(solver, out, |s| Ok(s.inst.payoffs.x_r()))
}

/// Truncation horizon of the solved boundary grid.
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_horizon(solver: *const MsSolver, out: *mut f64) -> MsStatus {
    eval1(solver, out, |s| Ok(s.boundary.horizon()))
}

/// Boundary b(m) for m ≥ m̲ (extrapolated beyond the horizon).
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_boundary_at(
    solver: *const MsSolver,
    m: f64,
    out: *mut f64,
) -> MsStatus {
    eval1(solver, out, |s| Ok(s.boundary.eval_extrapolated(m)))
}

/// Value surface W(x, m).
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_value(
    solver: *const MsSolver,
    x: f64,
    m: f64,
    out: *mut f64,
) -> MsStatus {
    eval1(solver, out, |s| s.surface.value(x, m))
}

/// Initial value V̄(x) = W(x, x) + F(x)G(x).
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_initial_value(
    solver: *const MsSolver,
    x: f64,
    out: *mut f64,
) -> MsStatus {
    eval1(solver, out, |s| s.surface.initial_value(x))
}

/// ∂W/∂x(x, m).
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_partial_x(
    solver: *const MsSolver,
    x: f64,
    m: f64,
    out: *mut f64,
) -> MsStatus {
    eval1(solver, out, |s| s.surface.partial_x(x, m))
}

/// ∂W/∂m(x, m); `right_side` selects the regime at the kink m = m̲.
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_partial_m(
    solver: *const MsSolver,
    x: f64,
    m: f64,
    right_side: bool,
    out: *mut f64,
) -> MsStatus {
    eval1(solver, out, |s| {
        s.surface
            .partial_m(x, m, if right_side { Side::Right } else { Side::Left })
    })
}

/// Region classification of (x, m).
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_region(
    solver: *const MsSolver,
    x: f64,
    m: f64,
    out: *mut MsRegion,
) -> MsStatus {
    if solver.is_null() || out.is_null() {
        set_error("null pointer");
        return MsStatus::NullPointer;
    }
    guarded(|| match (*solver).surface.region(x, m) {
        Ok(r) => {
            *out = match r {
                maxstop::value::Region::Stop => MsRegion::Stop,
                maxstop::value::Region::LeftOfStop => MsRegion::LeftOfStop,
                maxstop::value::Region::RightOfStop => MsRegion::RightOfStop,
                maxstop::value::Region::BelowMlow => MsRegion::BelowMlow,
            };
            MsStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    })
}

#[allow(clippy::too_many_arguments)]
unsafe fn run_sim(
    solver: *const MsSolver,
    out: *mut MsSimResult,
    f: impl FnOnce(&MsSolver, &SimConfig) -> Result<sim::SimResult, Error>,
    n_paths: u64,
    dt: f64,
    t_max: f64,
    seed: u64,
    start: (f64, f64),
) -> MsStatus {
    if solver.is_null() || out.is_null() {
        set_error("null pointer");
        return MsStatus::NullPointer;
    }
    guarded(|| {
        let s = &*solver;
        let t_max = if t_max > 0.0 {
            t_max
        } else {
            SimConfig::default_t_max(s.inst.model.r())
        };
        let cfg = SimConfig::new(n_paths, dt, t_max, seed, start);
        match f(s, &cfg) {
            Ok(r) => {
                *out = MsSimResult {
                    estimate: r.estimate,
                    std_error: r.std_error,
                    n_stopped: r.n_stopped,
                    n_truncated: r.n_truncated,
                    truncation_bound: r.truncation_bound,
                };
                MsStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Monte Carlo value of stopping (X, M) at the solved boundary from
/// (x, m). Non-positive `t_max` selects the default horizon.
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ms_simulate_stopped(
    solver: *const MsSolver,
    x: f64,
    m: f64,
    n_paths: u64,
    dt: f64,
    t_max: f64,
    seed: u64,
    out: *mut MsSimResult,
) -> MsStatus {
    run_sim(
        solver,
        out,
        |s, cfg| sim::simulate_stopped_value(&s.inst, &s.boundary, cfg),
        n_paths,
        dt,
        t_max,
        seed,
        (x, m),
    )
}

/// Monte Carlo value of the original game from the diagonal start (x, x)
/// under the boundary policy.
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ms_simulate_game(
    solver: *const MsSolver,
    x: f64,
    n_paths: u64,
    dt: f64,
    t_max: f64,
    seed: u64,
    out: *mut MsSimResult,
) -> MsStatus {
    run_sim(
        solver,
        out,
        |s, cfg| sim::simulate_game_value(&s.inst, StoppingPolicy::Boundary(&s.boundary), cfg),
        n_paths,
        dt,
        t_max,
        seed,
        (x, x),
    )
}
