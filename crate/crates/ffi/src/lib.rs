//! C interface to the `sectored-mimo` simulator.
//!
//! Objects are opaque heap handles created by `sm_*_new`/`sm_run_scenario`
//! and released with the matching `*_free`. Every fallible call returns an
//! [`SmStatus`]; the message of the most recent failure on the calling
//! thread is available from [`sm_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use sectored_mimo::harness::{self, RunResult, ScenarioSpec};
use sectored_mimo::{build_layout, AntennaMode, Error, NetworkConfig, Scheme};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    SolverFailure = 4,
    Io = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmAntennaMode {
    Directional = 0,
    Omni = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmScheme {
    Upa = 0,
    Cpa = 1,
    Dpa = 2,
}

/// Network configuration handle.
pub struct SmConfig {
    inner: NetworkConfig,
}

/// Finished scenario handle.
pub struct SmRun {
    inner: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> SmStatus {
    match e.exit_code() {
        1 => SmStatus::InvalidConfig,
        3 => SmStatus::Io,
        _ => SmStatus::SolverFailure,
    }
}

/// Runs `f`, recording errors and converting panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), (SmStatus, String)>) -> SmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside sectored-mimo");
            SmStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (SmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SmStatus, String) {
    (SmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (SmStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// New configuration with the built-in defaults. Never returns null.
#[no_mangle]
pub extern "C" fn sm_config_new() -> *mut SmConfig {
    Box::into_raw(Box::new(SmConfig { inner: NetworkConfig::default() }))
}

/// Parses a TOML configuration document into `*out`.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sm_config_from_toml(toml: *const c_char, out: *mut *mut SmConfig) -> SmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = c_str(toml, "toml")?;
        let inner = NetworkConfig::from_toml(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SmConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sm_config_free(cfg: *mut SmConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn config_mut<'a>(cfg: *mut SmConfig) -> Result<&'a mut NetworkConfig, (SmStatus, String)> {
    cfg.as_mut().map(|c| &mut c.inner).ok_or_else(|| null("config"))
}

/// Sets the number of cells (1, 7 or 19) and users per cell.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_config_set_size(cfg: *mut SmConfig, cells: usize, users_per_cell: usize) -> SmStatus {
    guard(|| {
        let c = config_mut(cfg)?;
        let next = NetworkConfig { cells, users_per_cell, ..c.clone() };
        next.validate().map_err(lib_err)?;
        build_layout(&next).map_err(lib_err)?;
        *c = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_config_set_seed(cfg: *mut SmConfig, seed: u64) -> SmStatus {
    guard(|| {
        config_mut(cfg)?.seed = seed;
        Ok(())
    })
}

/// Writes the configuration as TOML into `buf` (NUL-terminated) and the
/// required size including the terminator into `*needed`. A null or short
/// buffer only reports the size.
///
/// # Safety
/// `cfg` must be a live handle; `buf` must hold `len` bytes; `needed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sm_config_to_toml(
    cfg: *const SmConfig,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> SmStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("config"))?;
        if needed.is_null() {
            return Err(null("needed"));
        }
        let text = c.inner.to_toml();
        *needed = text.len() + 1;
        if !buf.is_null() && len > text.len() {
            ptr::copy_nonoverlapping(text.as_ptr().cast::<c_char>(), buf, text.len());
            *buf.add(text.len()) = 0;
        }
        Ok(())
    })
}

/// Runs a scenario over `n_mb` values of total elements per base station.
/// `threads == 0` uses all cores. On success `*out` receives a run handle.
///
/// # Safety
/// `cfg` must be a live handle, `mb` must point to `n_mb` doubles and `out`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn sm_run_scenario(
    cfg: *const SmConfig,
    mode: SmAntennaMode,
    scheme: SmScheme,
    mb: *const f64,
    n_mb: usize,
    n_drops: usize,
    threads: usize,
    out: *mut *mut SmRun,
) -> SmStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if mb.is_null() || n_mb == 0 {
            return Err((SmStatus::InvalidArgument, "M_B list is empty".into()));
        }
        let spec = ScenarioSpec {
            base: c.inner.clone(),
            mode: match mode {
                SmAntennaMode::Directional => AntennaMode::Directional,
                SmAntennaMode::Omni => AntennaMode::Omni,
            },
            scheme: match scheme {
                SmScheme::Upa => Scheme::Upa,
                SmScheme::Cpa => Scheme::Cpa,
                SmScheme::Dpa => Scheme::Dpa,
            },
            mb: std::slice::from_raw_parts(mb, n_mb).to_vec(),
            n_drops,
            output_dir: None,
            threads: (threads > 0).then_some(threads),
        };
        let inner = harness::run_scenario(&spec).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SmRun { inner }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sm_run_free(run: *mut SmRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

unsafe fn sweep<'a>(run: *const SmRun, index: usize) -> Result<&'a harness::SweepResult, (SmStatus, String)> {
    let r = run.as_ref().ok_or_else(|| null("run"))?;
    r.inner.sweeps.get(index).ok_or_else(|| (SmStatus::InvalidArgument, format!("sweep index {index} out of range")))
}

/// Number of `M_B` sweep points in the run, or 0 for a null handle.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sm_run_num_sweeps(run: *const SmRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.sweeps.len())
}

/// Number of per-user rows of sweep `index`.
///
/// # Safety
/// `run` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sm_run_num_rows(run: *const SmRun, index: usize, out: *mut usize) -> SmStatus {
    guard(|| {
        let s = sweep(run, index)?;
        *out.as_mut().ok_or_else(|| null("out"))? = s.records.len();
        Ok(())
    })
}

/// Copies the per-user rates (bits/s/Hz) of sweep `index` into `buf`,
/// which must hold at least `sm_run_num_rows` entries.
///
/// # Safety
/// `run` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sm_run_rates(run: *const SmRun, index: usize, buf: *mut f64, len: usize) -> SmStatus {
    guard(|| {
        let s = sweep(run, index)?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < s.records.len() {
            return Err((SmStatus::InvalidArgument, format!("buffer holds {len}, need {}", s.records.len())));
        }
        let out = std::slice::from_raw_parts_mut(buf, s.records.len());
        for (o, r) in out.iter_mut().zip(&s.records) {
            *o = r.rate;
        }
        Ok(())
    })
}

/// Rate achieved by 95% of users in sweep `index`.
///
/// # Safety
/// `run` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sm_run_likely_rate_95(run: *const SmRun, index: usize, out: *mut f64) -> SmStatus {
    guard(|| {
        let s = sweep(run, index)?;
        let v = s.likely_rate_95().map_err(lib_err)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Writes the CSV and summary files of every sweep point into `dir`.
///
/// # Safety
/// `run` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn sm_run_export(run: *const SmRun, dir: *const c_char) -> SmStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let dir = c_str(dir, "dir")?;
        harness::export(&r.inner, Path::new(dir)).map_err(lib_err)?;
        Ok(())
    })
}
