use std::ffi::CStr;
use std::ptr;

use hypdelay_ffi::*;

fn last_error() -> String {
    let p = hd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn plant(tau_bar: f64) -> *mut HdPlant {
    let mut p = ptr::null_mut();
    let st = unsafe { hd_plant_new(1.0, 1.0, 1.0, 1.0, 1.0, 3.0, tau_bar, &mut p) };
    assert_eq!(st, HdStatus::Ok);
    p
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(hd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn invalid_plant_reports_the_field() {
    let mut p = ptr::null_mut();
    let st = unsafe { hd_plant_new(-1.0, 1.0, 1.0, 1.0, 1.0, 3.0, 3.0, &mut p) };
    assert_ne!(st, HdStatus::Ok);
    assert!(p.is_null());
    assert!(last_error().contains("eps1") || last_error().contains("speed"), "{}", last_error());
}

#[test]
fn null_arguments_are_rejected() {
    let st = unsafe { hd_plant_new(1.0, 1.0, 1.0, 1.0, 1.0, 3.0, 3.0, ptr::null_mut()) };
    assert_eq!(st, HdStatus::NullPointer);
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { hd_kernels_build(ptr::null(), 11, &mut k) }, HdStatus::NullPointer);
    assert_eq!(unsafe { hd_kernels_grid_n(ptr::null()) }, 0);
    unsafe {
        hd_plant_free(ptr::null_mut());
        hd_kernels_free(ptr::null_mut());
        hd_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn settling_time_of_reference_plant() {
    let p = plant(3.0);
    let mut t = 0.0;
    assert_eq!(unsafe { hd_plant_t_final(p, 101, &mut t) }, HdStatus::Ok);
    assert!((t - 5.0).abs() < 1e-12);
    unsafe { hd_plant_free(p) };
}

#[test]
fn kernels_simulation_and_scan_round_trip() {
    let p = plant(3.0);
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { hd_kernels_build(p, 21, &mut k) }, HdStatus::Ok);
    let n = unsafe { hd_kernels_grid_n(k) };
    assert_eq!(n, 21);

    let mut gain = vec![0.0; n];
    assert_eq!(unsafe { hd_kernels_gain_p(k, gain.as_mut_ptr(), n) }, HdStatus::Ok);
    assert!(gain.iter().all(|v| v.is_finite()));
    let mut short = vec![0.0; n - 1];
    assert_eq!(
        unsafe { hd_kernels_gain_mu(k, short.as_mut_ptr(), n - 1) },
        HdStatus::BufferTooSmall
    );
    let (mut a1, mut a2) = (vec![0.0; n], vec![0.0; n]);
    assert_eq!(
        unsafe { hd_kernels_state_gains(k, a1.as_mut_ptr(), a2.as_mut_ptr(), n) },
        HdStatus::Ok
    );

    let mut traj = ptr::null_mut();
    let st = unsafe { hd_simulate(p, k, HdController::Compensated, 0.05, 6.0, &mut traj) };
    assert_eq!(st, HdStatus::Ok, "{}", last_error());
    let len = unsafe { hd_trajectory_len(traj) };
    assert_eq!(len, 121);
    let (mut t, mut l2) = (vec![0.0; len], vec![0.0; len]);
    assert_eq!(
        unsafe { hd_trajectory_series(traj, t.as_mut_ptr(), l2.as_mut_ptr(), ptr::null_mut(), len) },
        HdStatus::Ok
    );
    assert!((t[len - 1] - 6.0).abs() < 1e-12);
    assert!(l2[len - 1] < 0.1 * l2[0]);

    let mut summary = HdScanSummary::default();
    let st = unsafe { hd_robust_scan(k, HdForm::Loop, 2.0, 10.0, 200, 20, &mut summary) };
    assert_eq!(st, HdStatus::Ok);
    assert_eq!(summary.stable, 1);
    assert_eq!(summary.zero_count, 0);

    unsafe {
        hd_trajectory_free(traj);
        hd_kernels_free(k);
        hd_plant_free(p);
    }
}

#[test]
fn cfl_violation_maps_to_its_code() {
    let p = plant(3.0);
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { hd_kernels_build(p, 21, &mut k) }, HdStatus::Ok);
    let mut traj = ptr::null_mut();
    let st = unsafe { hd_simulate(p, k, HdController::OpenLoop, 0.5, 1.0, &mut traj) };
    assert_eq!(st, HdStatus::CflViolation);
    assert!(traj.is_null());
    unsafe {
        hd_kernels_free(k);
        hd_plant_free(p);
    }
}
