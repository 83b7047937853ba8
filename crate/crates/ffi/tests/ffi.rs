use std::ffi::{CStr, CString};
use std::ptr;

use dam_control_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = dam_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn regime(j2: f64) -> *mut DamRegimeParams {
    let mut h = ptr::null_mut();
    let costs = c("linear:2,1");
    let status = unsafe { dam_regime_new(1.0, j2, 0.5, 1.0, costs.as_ptr(), &mut h) };
    assert_eq!(status, DamStatus::Ok);
    h
}

#[test]
fn stationary_hand_example() {
    let (b1, b2) = (c("exp:1"), c("exp:2"));
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { dam_model_new(1.0, b1.as_ptr(), b2.as_ptr(), 2, 1.0, 1.0, &mut m) }, DamStatus::Ok);
    let (mut p1, mut p2, mut defect) = (0.0, 0.0, 0.0);
    let mut q = [0.0; 2];
    let status = unsafe { dam_model_stationary(m, &mut p1, &mut p2, &mut defect, q.as_mut_ptr(), q.len()) };
    assert_eq!(status, DamStatus::Ok);
    assert!((p1 - 0.2).abs() < 1e-12 && (p2 - 0.2).abs() < 1e-12);
    assert!((p1 + p2 + q.iter().sum::<f64>() + defect - 1.0).abs() < 1e-12);

    let costs = c("constant:1");
    let mut objective = 0.0;
    assert_eq!(unsafe { dam_model_objective(m, costs.as_ptr(), &mut objective) }, DamStatus::Ok);
    assert!((objective - 1.2).abs() < 1e-12);

    let mut short = [0.0; 1];
    let status = unsafe { dam_model_stationary(m, &mut p1, &mut p2, &mut defect, short.as_mut_ptr(), 1) };
    assert_eq!(status, DamStatus::BufferTooSmall);
    unsafe { dam_model_free(m) };
}

#[test]
fn solve_upper_and_threshold() {
    let h = regime(1.06);
    let mut sol = DamSolution { regime: DamRegimeKind::Balanced, c: 0.0, objective: 0.0, balanced_value: 0.0 };
    assert_eq!(unsafe { dam_solve(h, 0.0, 0.0, &mut sol) }, DamStatus::Ok);
    assert_eq!(sol.regime, DamRegimeKind::Upper);
    assert!((sol.c - 0.2).abs() < 0.01);
    assert!(sol.objective < sol.balanced_value);

    let mut limit = 0.0;
    let mut upper = 0.0;
    let mut lower = 0.0;
    unsafe {
        assert_eq!(dam_regime_balanced_limit(h, &mut limit), DamStatus::Ok);
        assert_eq!(dam_regime_j_upper(h, 0.0, &mut upper), DamStatus::Ok);
        assert_eq!(dam_regime_j_lower(h, 0.0, &mut lower), DamStatus::Ok);
    }
    assert!((limit - 2.53).abs() < 1e-12);
    assert!((upper - limit).abs() < 1e-9 && (lower - limit).abs() < 1e-9);

    let mut threshold = 0.0;
    assert_eq!(unsafe { dam_threshold_j2(h, 0.0, 0.0, &mut threshold) }, DamStatus::Ok);
    assert!((threshold - 4.0 / 3.0).abs() < 2e-3, "{threshold}");
    unsafe { dam_regime_free(h) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut h = ptr::null_mut();
    let bad = c("quadratic:1");
    assert_eq!(unsafe { dam_regime_new(1.0, 1.0, 0.5, 1.0, bad.as_ptr(), &mut h) }, DamStatus::Config);
    assert!(last_error().contains("quadratic"));
    assert!(h.is_null());

    let costs = c("constant:1");
    assert_eq!(unsafe { dam_regime_new(1.0, 1.0, 1.5, 1.0, costs.as_ptr(), &mut h) }, DamStatus::Domain);

    let good = regime(1.0);
    let mut out = 0.0;
    assert_eq!(unsafe { dam_regime_j_upper(good, -1.0, &mut out) }, DamStatus::Domain);
    assert_eq!(unsafe { dam_regime_j_upper(good, 1.0, ptr::null_mut()) }, DamStatus::NullPointer);
    assert_eq!(last_error(), "out is null");
    assert_eq!(unsafe { dam_regime_j_upper(ptr::null(), 1.0, &mut out) }, DamStatus::NullPointer);

    let (b1, b2) = (c("exp:1"), c("exp:0.5"));
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { dam_model_new(1.0, b1.as_ptr(), b2.as_ptr(), 3, 1.0, 1.0, &mut m) }, DamStatus::Config);
    let invalid = [0xffu8, 0];
    let status = unsafe { dam_model_new(1.0, invalid.as_ptr().cast(), b1.as_ptr(), 3, 1.0, 1.0, &mut m) };
    assert_eq!(status, DamStatus::InvalidString);
    unsafe {
        dam_regime_free(good);
        dam_regime_free(ptr::null_mut());
        dam_model_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(dam_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/dam_control.h");
    for name in [
        "dam_last_error_message",
        "dam_model_new",
        "dam_model_free",
        "dam_model_stationary",
        "dam_model_objective",
        "dam_regime_new",
        "dam_regime_free",
        "dam_solve",
        "dam_threshold_j2",
        "typedef struct DamModel DamModel",
        "DAM_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
