use std::ffi::{CStr, CString};
use std::ptr;

use tebe_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(tebe_last_error()) }.to_string_lossy().into_owned()
}

fn solve(k: u32, zeta: f64) -> *mut TebeProfile {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { tebe_solve(k, zeta, &mut p) }, TebeStatus::Ok, "{}", last_error());
    assert!(!p.is_null());
    p
}

#[test]
fn solve_eval_verify_free() {
    let p = solve(1, 0.0);
    let mut s = TebeState::default();
    unsafe {
        assert_eq!(tebe_profile_eval(p, 1.0, &mut s), TebeStatus::Ok);
        let exact = (2.0 * 2.0f64.sinh() / 2.0).ln();
        assert!((s.u - exact).abs() < 1e-9, "{} vs {exact}", s.u);
        assert!((s.du - 2.0 / 2.0f64.tanh()).abs() < 1e-8, "{}", s.du);

        let mut v = TebeVerdict::default();
        assert_eq!(tebe_profile_verify(p, &mut v), TebeStatus::Ok);
        assert!(v.passed && v.failed_mask == 0 && v.min_relative_margin > 0.0);

        let (mut k, mut z, mut r) = (0, -1.0, -1.0);
        assert_eq!(tebe_profile_info(p, &mut k, &mut z, &mut r), TebeStatus::Ok);
        assert_eq!((k, z), (1, 0.0));
        assert!(r < 1e-8);
        assert_eq!(tebe_profile_info(p, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), TebeStatus::Ok);
        tebe_profile_free(p);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(tebe_solve(1, 0.7, &mut p), TebeStatus::InvalidArgument);
        assert!(p.is_null());
        assert!(last_error().contains("zeta"));
        assert_eq!(tebe_solve(0, 0.1, &mut p), TebeStatus::InvalidArgument);
        assert_eq!(tebe_solve(1, 0.1, ptr::null_mut()), TebeStatus::NullPointer);

        let mut s = TebeState::default();
        assert_eq!(tebe_profile_eval(ptr::null(), 1.0, &mut s), TebeStatus::NullPointer);
        let q = solve(2, 0.1);
        assert_eq!(tebe_profile_eval(q, 1e6, &mut s), TebeStatus::OutOfRange);
        assert!(!last_error().is_empty());
        assert_eq!(tebe_profile_eval(q, 2.0, &mut s), TebeStatus::Ok);
        assert!(last_error().is_empty());
        tebe_profile_free(q);
        tebe_profile_free(ptr::null_mut());
    }
}

#[test]
fn save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("p.json").to_str().unwrap()).unwrap();
    let p = solve(1, 0.25);
    let mut q = ptr::null_mut();
    let (mut a, mut b) = (TebeState::default(), TebeState::default());
    unsafe {
        assert_eq!(tebe_profile_save(p, path.as_ptr()), TebeStatus::Ok);
        assert_eq!(tebe_profile_load(path.as_ptr(), &mut q), TebeStatus::Ok);
        for tau in [1e-3, 0.3, 4.0] {
            tebe_profile_eval(p, tau, &mut a);
            tebe_profile_eval(q, tau, &mut b);
            assert_eq!(a, b);
        }
        let missing = CString::new(dir.path().join("none.json").to_str().unwrap()).unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(tebe_profile_load(missing.as_ptr(), &mut r), TebeStatus::Io);
        assert_eq!(tebe_profile_load(ptr::null(), &mut r), TebeStatus::NullPointer);
        tebe_profile_free(p);
        tebe_profile_free(q);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(tebe_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
