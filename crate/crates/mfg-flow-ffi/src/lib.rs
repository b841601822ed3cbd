//! C ABI over the solver core.
//!
//! Conventions: every function returns an [`MfgStatus`] (or a plain
//! value where it cannot fail); objects cross the boundary as opaque
//! handles that must be released with the matching `_free` function;
//! array outputs are caller-allocated buffers checked against the
//! required length. On any non-OK status a thread-local message is set,
//! readable via [`mfg_last_error_message`] until the next call on the
//! same thread.

use mfg_flow::models::ModelConfig;
use mfg_flow::solver::{kfp_reconstruct, picard_solve, PicardConfig};
use mfg_flow::types::{SimplexDist, TimeGrid};
use mfg_flow::MfgModel;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfgStatus {
    MfgOk = 0,
    /// Null pointer, bad UTF-8, wrong dimensions, or out-of-range value.
    MfgInvalidArgument = 1,
    /// Unparsable or inconsistent configuration.
    MfgConfigError = 2,
    /// Solver failure: CFL violation, non-convergence, non-finite data.
    MfgNumericalError = 3,
    MfgIoError = 4,
    /// Output buffer shorter than the required length.
    MfgBufferTooSmall = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = sanitized);
}

fn status_of(err: &mfg_flow::Error) -> MfgStatus {
    match err {
        mfg_flow::Error::Config(_) => MfgStatus::MfgConfigError,
        mfg_flow::Error::Numerical(_) | mfg_flow::Error::Simplex(_) => {
            MfgStatus::MfgNumericalError
        }
        mfg_flow::Error::Io(_) | mfg_flow::Error::Format(_) => MfgStatus::MfgIoError,
    }
}

/// Last error message on this thread; valid until the next API call.
#[no_mangle]
pub extern "C" fn mfg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mfg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque game handle.
pub struct MfgModelHandle {
    model: Box<dyn MfgModel>,
}

/// Opaque solver-result handle.
pub struct MfgSolutionHandle {
    u: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
    d: usize,
    points: usize,
    iterations: usize,
    converged: bool,
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, MfgStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(MfgStatus::MfgInvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        MfgStatus::MfgInvalidArgument
    })
}

fn build_model(cfg: ModelConfig) -> Result<*mut MfgModelHandle, MfgStatus> {
    match cfg.build() {
        Ok(model) => Ok(Box::into_raw(Box::new(MfgModelHandle { model }))),
        Err(e) => {
            set_error(&e.to_string());
            Err(status_of(&e))
        }
    }
}

fn guarded(f: impl FnOnce() -> MfgStatus) -> MfgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            MfgStatus::MfgNumericalError
        }
    }
}

/// Load a model configuration file (TOML) and instantiate the game.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
/// On success `*out` owns the handle; release it with
/// [`mfg_model_free`].
#[no_mangle]
pub unsafe extern "C" fn mfg_model_load(
    path: *const c_char,
    out: *mut *mut MfgModelHandle,
) -> MfgStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return MfgStatus::MfgInvalidArgument;
        }
        let path = match cstr(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match ModelConfig::load(Path::new(path)) {
            Ok(cfg) => match build_model(cfg) {
                Ok(handle) => {
                    *out = handle;
                    MfgStatus::MfgOk
                }
                Err(s) => s,
            },
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Instantiate a game from model-config TOML text.
///
/// # Safety
/// As for [`mfg_model_load`].
#[no_mangle]
pub unsafe extern "C" fn mfg_model_from_toml(
    text: *const c_char,
    out: *mut *mut MfgModelHandle,
) -> MfgStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return MfgStatus::MfgInvalidArgument;
        }
        let text = match cstr(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ModelConfig::from_toml(text) {
            Ok(cfg) => match build_model(cfg) {
                Ok(handle) => {
                    *out = handle;
                    MfgStatus::MfgOk
                }
                Err(s) => s,
            },
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Release a model handle. Null is a no-op.
///
/// # Safety
/// `handle` must come from a model constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mfg_model_free(handle: *mut MfgModelHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of states d, or 0 on a null handle.
///
/// # Safety
/// `handle` must be a live model handle or null.
#[no_mangle]
pub unsafe extern "C" fn mfg_model_num_states(handle: *const MfgModelHandle) -> usize {
    handle.as_ref().map_or(0, |h| h.model.num_states())
}

/// Terminal-cost parameter dimension k, or 0 on a null handle.
///
/// # Safety
/// `handle` must be a live model handle or null.
#[no_mangle]
pub unsafe extern "C" fn mfg_model_param_dim(handle: *const MfgModelHandle) -> usize {
    handle.as_ref().map_or(0, |h| h.model.param_dim())
}

/// The model's default horizon T, or NaN on a null handle.
///
/// # Safety
/// `handle` must be a live model handle or null.
#[no_mangle]
pub unsafe extern "C" fn mfg_model_horizon(handle: *const MfgModelHandle) -> f64 {
    handle.as_ref().map_or(f64::NAN, |h| h.model.horizon())
}

/// Solve one game instance by damped Picard iteration on a uniform grid
/// with `steps` steps over `[0, horizon]`. Pass `tol <= 0` or
/// `max_iter == 0` for the defaults (1e-9, 500).
///
/// # Safety
/// `eta` must point to `eta_len` doubles, `kappa` to `kappa_len`
/// doubles, and `out` must be valid. On success `*out` owns the
/// solution; release it with [`mfg_solution_free`].
#[no_mangle]
pub unsafe extern "C" fn mfg_picard_solve(
    model: *const MfgModelHandle,
    eta: *const f64,
    eta_len: usize,
    kappa: *const f64,
    kappa_len: usize,
    horizon: f64,
    steps: usize,
    tol: f64,
    max_iter: usize,
    out: *mut *mut MfgSolutionHandle,
) -> MfgStatus {
    guarded(|| {
        let Some(handle) = model.as_ref() else {
            set_error("null model handle");
            return MfgStatus::MfgInvalidArgument;
        };
        if eta.is_null() || kappa.is_null() || out.is_null() {
            set_error("null array or output pointer");
            return MfgStatus::MfgInvalidArgument;
        }
        let d = handle.model.num_states();
        let k = handle.model.param_dim();
        if eta_len != d || kappa_len != k {
            set_error("eta/kappa length does not match the model dimensions");
            return MfgStatus::MfgInvalidArgument;
        }
        let eta = std::slice::from_raw_parts(eta, eta_len);
        let kappa = std::slice::from_raw_parts(kappa, kappa_len);
        let eta = match SimplexDist::new(eta.to_vec()) {
            Ok(s) => s,
            Err(e) => {
                set_error(&e.to_string());
                return MfgStatus::MfgInvalidArgument;
            }
        };
        let grid = match TimeGrid::new(horizon, steps) {
            Ok(g) => g,
            Err(e) => {
                set_error(&e.to_string());
                return MfgStatus::MfgInvalidArgument;
            }
        };
        let mut cfg = PicardConfig::default();
        if tol > 0.0 {
            cfg.tol = tol;
        }
        if max_iter > 0 {
            cfg.max_iter = max_iter;
        }
        match picard_solve(handle.model.as_ref(), &eta, kappa, &grid, &cfg) {
            Ok(outcome) => {
                if !outcome.converged {
                    set_error("Picard iteration did not converge within max_iter");
                    return MfgStatus::MfgNumericalError;
                }
                let solution = Box::new(MfgSolutionHandle {
                    d,
                    points: grid.num_points(),
                    iterations: outcome.iterations,
                    converged: outcome.converged,
                    u: outcome.solution.u,
                    mu: outcome.solution.mu,
                });
                *out = Box::into_raw(solution);
                MfgStatus::MfgOk
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Release a solution handle. Null is a no-op.
///
/// # Safety
/// `handle` must come from [`mfg_picard_solve`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_free(handle: *mut MfgSolutionHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Grid points M + 1, or 0 on a null handle.
///
/// # Safety
/// `handle` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_num_points(handle: *const MfgSolutionHandle) -> usize {
    handle.as_ref().map_or(0, |h| h.points)
}

/// Number of states d, or 0 on a null handle.
///
/// # Safety
/// `handle` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_num_states(handle: *const MfgSolutionHandle) -> usize {
    handle.as_ref().map_or(0, |h| h.d)
}

/// Picard iterations used, or 0 on a null handle.
///
/// # Safety
/// `handle` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_iterations(handle: *const MfgSolutionHandle) -> usize {
    handle.as_ref().map_or(0, |h| h.iterations)
}

/// 1 when the solve converged, else 0.
///
/// # Safety
/// `handle` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_converged(handle: *const MfgSolutionHandle) -> i32 {
    handle.as_ref().map_or(0, |h| i32::from(h.converged))
}

unsafe fn copy_table(
    table: &[Vec<f64>],
    d: usize,
    buf: *mut f64,
    len: usize,
) -> MfgStatus {
    if buf.is_null() {
        set_error("null buffer");
        return MfgStatus::MfgInvalidArgument;
    }
    let needed = table.len() * d;
    if len < needed {
        set_error("buffer too small");
        return MfgStatus::MfgBufferTooSmall;
    }
    let out = std::slice::from_raw_parts_mut(buf, needed);
    for (j, row) in table.iter().enumerate() {
        out[j * d..(j + 1) * d].copy_from_slice(row);
    }
    MfgStatus::MfgOk
}

/// Copy the value function into `buf` as a row-major (M+1) x d array.
///
/// # Safety
/// `buf` must point to at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_value_function(
    handle: *const MfgSolutionHandle,
    buf: *mut f64,
    len: usize,
) -> MfgStatus {
    guarded(|| {
        let Some(h) = handle.as_ref() else {
            set_error("null solution handle");
            return MfgStatus::MfgInvalidArgument;
        };
        copy_table(&h.u, h.d, buf, len)
    })
}

/// Copy the distribution flow into `buf` as a row-major (M+1) x d array.
///
/// # Safety
/// `buf` must point to at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_distribution(
    handle: *const MfgSolutionHandle,
    buf: *mut f64,
    len: usize,
) -> MfgStatus {
    guarded(|| {
        let Some(h) = handle.as_ref() else {
            set_error("null solution handle");
            return MfgStatus::MfgInvalidArgument;
        };
        copy_table(&h.mu, h.d, buf, len)
    })
}

/// Recover the distribution flow from an externally supplied value
/// table `u` (row-major (steps+1) x d, e.g. a learned operator's
/// output) by stepping the forward equation; writes a row-major
/// (steps+1) x d array into `mu_out`.
///
/// # Safety
/// `u` must point to `(steps + 1) * d` doubles, `eta` to `d` doubles,
/// and `mu_out` to at least `mu_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mfg_kfp_reconstruct(
    model: *const MfgModelHandle,
    u: *const f64,
    eta: *const f64,
    horizon: f64,
    steps: usize,
    mu_out: *mut f64,
    mu_len: usize,
) -> MfgStatus {
    guarded(|| {
        let Some(handle) = model.as_ref() else {
            set_error("null model handle");
            return MfgStatus::MfgInvalidArgument;
        };
        if u.is_null() || eta.is_null() {
            set_error("null array pointer");
            return MfgStatus::MfgInvalidArgument;
        }
        let d = handle.model.num_states();
        let rows = steps + 1;
        let u = std::slice::from_raw_parts(u, rows * d);
        let eta = std::slice::from_raw_parts(eta, d);
        let eta = match SimplexDist::new(eta.to_vec()) {
            Ok(s) => s,
            Err(e) => {
                set_error(&e.to_string());
                return MfgStatus::MfgInvalidArgument;
            }
        };
        let grid = match TimeGrid::new(horizon, steps) {
            Ok(g) => g,
            Err(e) => {
                set_error(&e.to_string());
                return MfgStatus::MfgInvalidArgument;
            }
        };
        match kfp_reconstruct(
            handle.model.as_ref(),
            |j| u[j * d..(j + 1) * d].to_vec(),
            &eta,
            &grid,
        ) {
            Ok(mu) => copy_table(&mu, d, mu_out, mu_len),
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}
