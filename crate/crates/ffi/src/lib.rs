//! C interface to the solver. Every function returns a [`TebeStatus`]; on
//! failure the message is available from [`tebe_last_error`] on the same
//! thread. Profiles are opaque and owned by the caller once returned.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use tebe::continuation::{solve_at, StepPolicy};
use tebe::error::TebeError;
use tebe::io::{RunConfig, SolutionFile};
use tebe::solver::{Profile, SolverConfig};
use tebe::verify::{check_all, constants_for};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TebeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoConvergence = 3,
    OutOfRange = 4,
    Io = 5,
    Internal = 6,
}

/// Radial state `(u, u', v, v')` at one value of `tau`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TebeState {
    pub u: f64,
    pub du: f64,
    pub v: f64,
    pub dv: f64,
}

/// Outcome of the nine bound checks. Bit `i - 1` of `failed_mask` is set
/// when check `i` failed.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TebeVerdict {
    pub passed: bool,
    pub failed_mask: u32,
    /// Smallest margin relative to its tolerance across all checks.
    pub min_relative_margin: f64,
}

/// A solved profile.
pub struct TebeProfile {
    file: SolutionFile,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

struct Fail(TebeStatus, String);

impl From<TebeError> for Fail {
    fn from(e: TebeError) -> Self {
        let status = match e {
            TebeError::ZetaOutOfRange(_) | TebeError::InvalidCharge(_) | TebeError::InvalidArgument(_) => TebeStatus::InvalidArgument,
            TebeError::Extrapolation { .. } | TebeError::OutsideSeriesRange { .. } => TebeStatus::OutOfRange,
            TebeError::Stall { .. } | TebeError::SingularJacobian { .. } | TebeError::Escape { .. } | TebeError::StepUnderflow { .. } => {
                TebeStatus::NoConvergence
            }
            _ => TebeStatus::Internal,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TebeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TebeStatus::Ok
        }
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            TebeStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(TebeStatus::NullPointer, format!("{what} is null"))
}

unsafe fn profile_ref<'a>(p: *const TebeProfile) -> Result<&'a TebeProfile, Fail> {
    // SAFETY: caller passes a handle from this library or null
    unsafe { p.as_ref() }.ok_or_else(|| null("profile"))
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    // SAFETY: non-null and nul-terminated per the contract
    let s = unsafe { CStr::from_ptr(path) }.to_str().map_err(|e| Fail(TebeStatus::InvalidArgument, format!("path: {e}")))?;
    Ok(Path::new(s))
}

fn wrap(config: RunConfig, profile: Profile) -> Result<Box<TebeProfile>, Fail> {
    let report = check_all(&profile, &constants_for(profile.p.k())?)?;
    Ok(Box::new(TebeProfile {
        file: SolutionFile::new(config, profile, &report),
    }))
}

/// Solves for charge `k` at twist `zeta` with default settings.
///
/// # Safety
/// `out` must be valid for writes. On success `*out` owns a profile that
/// must be released with [`tebe_profile_free`].
#[no_mangle]
pub unsafe extern "C" fn tebe_solve(k: u32, zeta: f64, out: *mut *mut TebeProfile) -> TebeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = RunConfig { k, zeta, ..RunConfig::default() };
        config.validate()?;
        let profile = solve_at(k, zeta, &SolverConfig::default(), &StepPolicy::default())?;
        if !profile.converged {
            return Err(Fail(TebeStatus::NoConvergence, format!("no convergence at zeta = {zeta}")));
        }
        // SAFETY: checked non-null above
        unsafe { *out = Box::into_raw(wrap(config, profile)?) };
        Ok(())
    })
}

/// Reads a solution file written by `tebe solve` or [`tebe_profile_save`].
///
/// # Safety
/// `path` must be a nul-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tebe_profile_load(path: *const c_char, out: *mut *mut TebeProfile) -> TebeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = unsafe { path_arg(path) }?;
        let text = std::fs::read_to_string(path).map_err(|e| Fail(TebeStatus::Io, format!("{}: {e}", path.display())))?;
        let file = SolutionFile::from_json(&text)?;
        // SAFETY: checked non-null above
        unsafe { *out = Box::into_raw(Box::new(TebeProfile { file })) };
        Ok(())
    })
}

/// # Safety
/// `profile` must come from this library; `path` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn tebe_profile_save(profile: *const TebeProfile, path: *const c_char) -> TebeStatus {
    guard(|| {
        let p = unsafe { profile_ref(profile) }?;
        let path = unsafe { path_arg(path) }?;
        std::fs::write(path, p.file.to_json()).map_err(|e| Fail(TebeStatus::Io, format!("{}: {e}", path.display())))
    })
}

/// Releases a profile. Null is ignored.
///
/// # Safety
/// `profile` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tebe_profile_free(profile: *mut TebeProfile) {
    if !profile.is_null() {
        // SAFETY: ownership returns from the caller
        drop(unsafe { Box::from_raw(profile) });
    }
}

/// Interpolated state at `tau`, including below the first grid point.
///
/// # Safety
/// `profile` must come from this library and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tebe_profile_eval(profile: *const TebeProfile, tau: f64, out: *mut TebeState) -> TebeStatus {
    guard(|| {
        let p = unsafe { profile_ref(profile) }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = p.file.profile.eval(tau)?;
        // SAFETY: checked non-null above
        unsafe {
            *out = TebeState {
                u: s.u,
                du: s.du,
                v: s.v,
                dv: s.dv,
            }
        };
        Ok(())
    })
}

/// Charge, twist and the matching residual of the solve.
///
/// # Safety
/// `profile` must come from this library; each output may be null.
#[no_mangle]
pub unsafe extern "C" fn tebe_profile_info(profile: *const TebeProfile, k: *mut u32, zeta: *mut f64, matching_residual: *mut f64) -> TebeStatus {
    guard(|| {
        let p = &unsafe { profile_ref(profile) }?.file.profile;
        // SAFETY: each pointer is either null or valid for writes
        unsafe {
            if let Some(k) = k.as_mut() {
                *k = p.p.k();
            }
            if let Some(z) = zeta.as_mut() {
                *z = p.p.zeta();
            }
            if let Some(r) = matching_residual.as_mut() {
                *r = p.matching_residual();
            }
        }
        Ok(())
    })
}

/// Runs the bound checks with the shipped constants.
///
/// # Safety
/// `profile` must come from this library and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tebe_profile_verify(profile: *const TebeProfile, out: *mut TebeVerdict) -> TebeStatus {
    guard(|| {
        let p = &unsafe { profile_ref(profile) }?.file.profile;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = check_all(p, &constants_for(p.p.k())?)?;
        let failed_mask = report.failed().iter().fold(0u32, |m, c| m | 1 << (c.id - 1));
        let min_relative_margin = report.checks.iter().map(|c| c.margin / c.tolerance).fold(f64::INFINITY, f64::min);
        // SAFETY: checked non-null above
        unsafe {
            *out = TebeVerdict {
                passed: report.passed,
                failed_mask,
                min_relative_margin,
            }
        };
        Ok(())
    })
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn tebe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn tebe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
