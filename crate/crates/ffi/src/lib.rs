//! C ABI over the batchrl core: opaque handles, integer status codes, and a
//! thread-local error message. The generated header lands in
//! `include/batchrl.h`.
//!
//! Handles are not thread-safe; callers must not share one handle across
//! threads without external synchronization.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use libc::{c_char, size_t};

use batchrl::config::Config;
use batchrl::error::Error;
use batchrl::eval::evaluate;
use batchrl::pipeline::cmd_run_pipeline;
use batchrl::policy::{load_checkpoint, GaussianPolicy, Observation, PolicyParams};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BrlStatus {
    Ok = 0,
    /// Bad configuration, malformed file, or dimension mismatch.
    ConfigError = 2,
    /// Numerical failure (integration blow-up, NaN objective, ...).
    NumericError = 3,
    /// A required pointer argument was null.
    NullPointer = 4,
    /// A string argument was not valid UTF-8.
    Utf8Error = 5,
    /// A panic was caught at the boundary.
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> BrlStatus {
    match err.exit_code() {
        2 => BrlStatus::ConfigError,
        _ => BrlStatus::NumericError,
    }
}

fn guard(f: impl FnOnce() -> BrlStatus + std::panic::UnwindSafe) -> BrlStatus {
    match catch_unwind(f) {
        Ok(status) => status,
        Err(_) => {
            set_error("panic caught at the FFI boundary");
            BrlStatus::Panic
        }
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, BrlStatus> {
    if ptr.is_null() {
        set_error("null string pointer");
        return Err(BrlStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string is not valid UTF-8");
        BrlStatus::Utf8Error
    })
}

/// Opaque resolved configuration.
pub struct BrlConfig {
    inner: Config,
}

/// Opaque policy: a checkpointed network plus its parameters.
pub struct BrlPolicy {
    policy: GaussianPolicy,
    params: PolicyParams,
}

/// Monte-Carlo evaluation statistics.
#[repr(C)]
pub struct BrlEvalStats {
    pub mean: f64,
    pub std: f64,
    pub p2: f64,
    pub p98: f64,
    pub episodes: u64,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn brl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent error on this thread. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn brl_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Creates the built-in default configuration (the CS1 pipeline).
///
/// # Safety
/// `out` must be a valid pointer; the result must be released with
/// [`brl_config_free`].
#[no_mangle]
pub unsafe extern "C" fn brl_config_default(out: *mut *mut BrlConfig) -> BrlStatus {
    guard(AssertUnwindSafe(|| {
        if out.is_null() {
            set_error("null output pointer");
            return BrlStatus::NullPointer;
        }
        let handle = Box::new(BrlConfig {
            inner: Config::default(),
        });
        *out = Box::into_raw(handle);
        BrlStatus::Ok
    }))
}

/// Parses a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid. The result
/// must be released with [`brl_config_free`].
#[no_mangle]
pub unsafe extern "C" fn brl_config_load(
    path: *const c_char,
    out: *mut *mut BrlConfig,
) -> BrlStatus {
    guard(AssertUnwindSafe(|| {
        if out.is_null() {
            set_error("null output pointer");
            return BrlStatus::NullPointer;
        }
        let path = match cstr(path) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match Config::parse_file(Path::new(path)) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(BrlConfig { inner: config }));
                BrlStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Overrides the master seed of a configuration.
///
/// # Safety
/// `config` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn brl_config_set_seed(config: *mut BrlConfig, seed: u64) -> BrlStatus {
    guard(AssertUnwindSafe(|| {
        let Some(config) = config.as_mut() else {
            set_error("null config handle");
            return BrlStatus::NullPointer;
        };
        config.inner.seed = seed;
        BrlStatus::Ok
    }))
}

/// # Safety
/// `config` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn brl_config_free(config: *mut BrlConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the full offline + transfer + online pipeline, writing a run
/// directory at `out_dir` (which must be absent or empty).
///
/// # Safety
/// `config` must be a live handle; `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn brl_run_pipeline(
    config: *const BrlConfig,
    out_dir: *const c_char,
) -> BrlStatus {
    guard(AssertUnwindSafe(|| {
        let Some(config) = config.as_ref() else {
            set_error("null config handle");
            return BrlStatus::NullPointer;
        };
        let out_dir = match cstr(out_dir) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match cmd_run_pipeline(&config.inner, Path::new(out_dir)) {
            Ok(_) => BrlStatus::Ok,
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Loads a policy checkpoint written by the pipeline.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid. The result
/// must be released with [`brl_policy_free`].
#[no_mangle]
pub unsafe extern "C" fn brl_policy_load(
    path: *const c_char,
    out: *mut *mut BrlPolicy,
) -> BrlStatus {
    guard(AssertUnwindSafe(|| {
        if out.is_null() {
            set_error("null output pointer");
            return BrlStatus::NullPointer;
        }
        let path = match cstr(path) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let (config, params) = match load_checkpoint(Path::new(path)) {
            Ok(pair) => pair,
            Err(e) => {
                set_error(&e.to_string());
                return status_of(&e);
            }
        };
        match GaussianPolicy::new(config) {
            Ok(policy) => {
                *out = Box::into_raw(Box::new(BrlPolicy { policy, params }));
                BrlStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// # Safety
/// `policy` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn brl_policy_free(policy: *mut BrlPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Measured-state dimension the policy expects per step.
///
/// # Safety
/// `policy` must be a live handle (returns 0 on null).
#[no_mangle]
pub unsafe extern "C" fn brl_policy_n_states(policy: *const BrlPolicy) -> size_t {
    policy.as_ref().map_or(0, |p| p.policy.config().n_states)
}

/// # Safety
/// `policy` must be a live handle (returns 0 on null).
#[no_mangle]
pub unsafe extern "C" fn brl_policy_n_actions(policy: *const BrlPolicy) -> size_t {
    policy.as_ref().map_or(0, |p| p.policy.config().n_actions)
}

/// Length of the recurrent hidden state the caller must carry between steps
/// (initialize with zeros at the start of every batch).
///
/// # Safety
/// `policy` must be a live handle (returns 0 on null).
#[no_mangle]
pub unsafe extern "C" fn brl_policy_hidden_len(policy: *const BrlPolicy) -> size_t {
    policy.as_ref().map_or(0, |p| p.policy.hidden_len())
}

/// One policy evaluation: writes the action mean and standard deviation
/// (each `n_actions` long) and replaces `hidden` with the next recurrent
/// state. `time_fraction` is t/T in [0, 1]. With history depth 1, `state`
/// holds the current measured state and `prev_action` the previously applied
/// control (zeros at t = 0).
///
/// # Safety
/// All pointers must reference buffers of the stated lengths; `policy` must
/// be a live handle and must not be shared across threads concurrently.
#[no_mangle]
pub unsafe extern "C" fn brl_policy_act(
    policy: *mut BrlPolicy,
    state: *const f64,
    n_state: size_t,
    prev_action: *const f64,
    n_prev: size_t,
    hidden: *mut f64,
    n_hidden: size_t,
    time_fraction: f64,
    mean_out: *mut f64,
    std_out: *mut f64,
) -> BrlStatus {
    guard(AssertUnwindSafe(|| {
        let Some(handle) = policy.as_mut() else {
            set_error("null policy handle");
            return BrlStatus::NullPointer;
        };
        if state.is_null()
            || prev_action.is_null()
            || hidden.is_null()
            || mean_out.is_null()
            || std_out.is_null()
        {
            set_error("null buffer pointer");
            return BrlStatus::NullPointer;
        }
        let obs = Observation {
            state: std::slice::from_raw_parts(state, n_state).to_vec(),
            previous_action: std::slice::from_raw_parts(prev_action, n_prev).to_vec(),
            hidden: std::slice::from_raw_parts(hidden, n_hidden).to_vec(),
            time_fraction,
        };
        match handle.policy.forward(&handle.params, &obs) {
            Ok(step) => {
                let n_actions = handle.policy.config().n_actions;
                std::slice::from_raw_parts_mut(mean_out, n_actions).copy_from_slice(&step.mean);
                std::slice::from_raw_parts_mut(std_out, n_actions).copy_from_slice(&step.std);
                std::slice::from_raw_parts_mut(hidden, n_hidden).copy_from_slice(&step.hidden);
                BrlStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Monte-Carlo evaluation of a loaded policy on the configured plant.
/// `episodes == 0` uses the configuration's evaluation episode count.
///
/// # Safety
/// `config` and `policy` must be live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn brl_evaluate(
    config: *const BrlConfig,
    policy: *const BrlPolicy,
    episodes: u32,
    out: *mut BrlEvalStats,
) -> BrlStatus {
    guard(AssertUnwindSafe(|| {
        let (Some(config), Some(handle)) = (config.as_ref(), policy.as_ref()) else {
            set_error("null handle");
            return BrlStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return BrlStatus::NullPointer;
        }
        let plant = config.inner.build_plant(config.inner.plant);
        let n = if episodes == 0 {
            config.inner.eval.episodes
        } else {
            episodes as usize
        };
        match evaluate(
            &handle.policy,
            &handle.params,
            plant.as_ref(),
            n,
            config.inner.train.discount,
            config.inner.seed,
        ) {
            Ok((report, _)) => {
                *out = BrlEvalStats {
                    mean: report.mean,
                    std: report.std,
                    p2: report.p2,
                    p98: report.p98,
                    episodes: report.episodes as u64,
                };
                BrlStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}
