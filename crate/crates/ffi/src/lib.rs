//! C ABI over the hypdelay toolkit.
//!
//! Objects are opaque handles created by `*_new`/`*_build` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`HdStatus`]; the message of the last failure on the calling thread is
//! available from [`hd_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hypdelay::kernels::SolveOptions;
use hypdelay::pipeline::KernelBundle;
use hypdelay::plant::{Grid1D, PlantParams};
use hypdelay::robustness::{scan_p_for, CharacteristicForm, ScanWindow, Verdict};
use hypdelay::simulator::{simulate, ControllerKind, InitialCondition, SimConfig, SimTrajectory};
use hypdelay::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    GridMismatch = 3,
    NoConvergence = 4,
    CflViolation = 5,
    NonFiniteState = 6,
    InconclusiveContour = 7,
    BufferTooSmall = 8,
    Panic = 99,
}

/// Feedback law for [`hd_simulate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdController {
    OpenLoop = 0,
    Nominal = 1,
    Compensated = 2,
}

/// Characteristic function used by [`hd_robust_scan`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdForm {
    Loop = 0,
    Displayed = 1,
}

/// Summary of a robustness scan.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HdScanSummary {
    pub zero_count: usize,
    pub winding: f64,
    pub min_abs_contour: f64,
    /// 1 when the verdict is stable.
    pub stable: i32,
}

/// Plant description.
pub struct HdPlant(PlantParams);

/// Every kernel for one plant and grid.
pub struct HdKernels(KernelBundle);

/// A finished simulation.
pub struct HdTrajectory(SimTrajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HdStatus {
    match e {
        Error::NonPositiveSpeed { .. } | Error::InvalidParameter { .. } | Error::OutOfDomain { .. } => {
            HdStatus::InvalidArgument
        }
        Error::GridMismatch(_) | Error::InsufficientHistory { .. } => HdStatus::GridMismatch,
        Error::NoConvergence { .. } => HdStatus::NoConvergence,
        Error::CflViolation(_) => HdStatus::CflViolation,
        Error::NonFiniteState { .. } => HdStatus::NonFiniteState,
        Error::InconclusiveContour { .. } => HdStatus::InconclusiveContour,
    }
}

fn guard(f: impl FnOnce() -> Result<(), HdStatus>) -> HdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HdStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside hypdelay".into());
            HdStatus::Panic
        }
    }
}

fn lift<T>(r: hypdelay::Result<T>) -> Result<T, HdStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null_check(p: bool, what: &str) -> Result<(), HdStatus> {
    if p {
        set_error(format!("{what} is null"));
        Err(HdStatus::NullPointer)
    } else {
        Ok(())
    }
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), HdStatus> {
    null_check(out.is_null(), "output buffer")?;
    if len < src.len() {
        set_error(format!("buffer holds {len} values, {} needed", src.len()));
        return Err(HdStatus::BufferTooSmall);
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Plant with constant coefficients. `tau_bar` is the delay the controller
/// assumes.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn hd_plant_new(
    eps1: f64,
    eps2: f64,
    c1: f64,
    c2: f64,
    q: f64,
    tau: f64,
    tau_bar: f64,
    out: *mut *mut HdPlant,
) -> HdStatus {
    guard(|| {
        null_check(out.is_null(), "out")?;
        let p = PlantParams::constant(eps1, eps2, c1, c2, q, tau).with_tau_bar(tau_bar);
        lift(p.validate(&lift(Grid1D::new(2))?))?;
        *out = Box::into_raw(Box::new(HdPlant(p)));
        Ok(())
    })
}

/// # Safety
/// `plant` must come from [`hd_plant_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hd_plant_free(plant: *mut HdPlant) {
    if !plant.is_null() {
        drop(Box::from_raw(plant));
    }
}

/// Finite settling time `tau + phi1(1) + phi2(1)` on an `n`-node grid.
///
/// # Safety
/// `plant` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_plant_t_final(plant: *const HdPlant, n: usize, out: *mut f64) -> HdStatus {
    guard(|| {
        null_check(plant.is_null(), "plant")?;
        null_check(out.is_null(), "out")?;
        let g = lift(Grid1D::new(n))?;
        *out = lift((*plant).0.t_final(&g))?;
        Ok(())
    })
}

/// Solves every kernel of `plant` on an `n`-node grid.
///
/// # Safety
/// `plant` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_kernels_build(plant: *const HdPlant, n: usize, out: *mut *mut HdKernels) -> HdStatus {
    guard(|| {
        null_check(plant.is_null(), "plant")?;
        null_check(out.is_null(), "out")?;
        let g = lift(Grid1D::new(n))?;
        let b = lift(KernelBundle::build(&(*plant).0, &g, SolveOptions::default()))?;
        *out = Box::into_raw(Box::new(HdKernels(b)));
        Ok(())
    })
}

/// # Safety
/// `kernels` must come from [`hd_kernels_build`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hd_kernels_free(kernels: *mut HdKernels) {
    if !kernels.is_null() {
        drop(Box::from_raw(kernels));
    }
}

/// Number of grid nodes (length of every trace), 0 for a null handle.
///
/// # Safety
/// `kernels` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hd_kernels_grid_n(kernels: *const HdKernels) -> usize {
    if kernels.is_null() {
        0
    } else {
        (*kernels).0.grid.n()
    }
}

/// Copies the controller's history weight `p` (built with `tau_bar`).
///
/// # Safety
/// `kernels` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hd_kernels_gain_p(kernels: *const HdKernels, out: *mut f64, len: usize) -> HdStatus {
    guard(|| {
        null_check(kernels.is_null(), "kernels")?;
        copy_out(&(*kernels).0.alpha.gain.values, out, len)
    })
}

/// Copies the inverse-map weight `mu` (built with the true delay).
///
/// # Safety
/// `kernels` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hd_kernels_gain_mu(kernels: *const HdKernels, out: *mut f64, len: usize) -> HdStatus {
    guard(|| {
        null_check(kernels.is_null(), "kernels")?;
        copy_out(&(*kernels).0.beta.gain.values, out, len)
    })
}

/// Copies the state gains `alpha1(1,.)` and `alpha2(1,.)`.
///
/// # Safety
/// `kernels` must be a live handle; `a1` and `a2` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hd_kernels_state_gains(
    kernels: *const HdKernels,
    a1: *mut f64,
    a2: *mut f64,
    len: usize,
) -> HdStatus {
    guard(|| {
        null_check(kernels.is_null(), "kernels")?;
        let pair = &(*kernels).0.alpha.pair;
        copy_out(&pair.f1.right_trace(), a1, len)?;
        copy_out(&pair.f2.right_trace(), a2, len)
    })
}

/// Simulates from `u1 = u2 = sin(2 pi x)` on the kernel grid.
///
/// # Safety
/// `plant` and `kernels` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_simulate(
    plant: *const HdPlant,
    kernels: *const HdKernels,
    controller: HdController,
    dt: f64,
    t_end: f64,
    out: *mut *mut HdTrajectory,
) -> HdStatus {
    guard(|| {
        null_check(plant.is_null(), "plant")?;
        null_check(kernels.is_null(), "kernels")?;
        null_check(out.is_null(), "out")?;
        let b = &(*kernels).0;
        let kind = match controller {
            HdController::OpenLoop => ControllerKind::OpenLoop,
            HdController::Nominal => {
                let (k21, k22) = b.nominal_traces();
                ControllerKind::Nominal { k21, k22 }
            }
            HdController::Compensated => ControllerKind::Compensated(lift(b.controller_gains())?),
        };
        let init = InitialCondition::sin2pi(&b.grid);
        let traj = lift(simulate(&(*plant).0, &b.grid, &init, kind, SimConfig::new(dt, t_end)))?;
        *out = Box::into_raw(Box::new(HdTrajectory(traj)));
        Ok(())
    })
}

/// # Safety
/// `traj` must come from [`hd_simulate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hd_trajectory_free(traj: *mut HdTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of recorded steps (including `t = 0`), 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hd_trajectory_len(traj: *const HdTrajectory) -> usize {
    if traj.is_null() {
        0
    } else {
        (*traj).0.times.len()
    }
}

/// Copies the per-step times, L2 norms and controls. Any of the three
/// buffers may be null to skip it.
///
/// # Safety
/// `traj` must be a live handle; non-null buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hd_trajectory_series(
    traj: *const HdTrajectory,
    times: *mut f64,
    l2: *mut f64,
    control: *mut f64,
    len: usize,
) -> HdStatus {
    guard(|| {
        null_check(traj.is_null(), "traj")?;
        let t = &(*traj).0;
        for (src, dst) in [(&t.times, times), (&t.l2, l2), (&t.control, control)] {
            if !dst.is_null() {
                copy_out(src, dst, len)?;
            }
        }
        Ok(())
    })
}

/// Scans the right half plane for zeros of the mismatch characteristic
/// function.
///
/// # Safety
/// `kernels` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_robust_scan(
    kernels: *const HdKernels,
    form: HdForm,
    sigma_max: f64,
    omega_max: f64,
    n_im: usize,
    n_re: usize,
    out: *mut HdScanSummary,
) -> HdStatus {
    guard(|| {
        null_check(kernels.is_null(), "kernels")?;
        null_check(out.is_null(), "out")?;
        let window = ScanWindow {
            sigma_max,
            omega_max,
            n_im,
            n_re,
            ..ScanWindow::default()
        };
        let form = match form {
            HdForm::Loop => CharacteristicForm::Loop,
            HdForm::Displayed => CharacteristicForm::Displayed,
        };
        let r = lift(scan_p_for(&(*kernels).0, form, &window))?;
        *out = HdScanSummary {
            zero_count: r.zero_count(),
            winding: r.contour.winding,
            min_abs_contour: r.contour.min_abs,
            stable: i32::from(r.verdict == Verdict::Stable),
        };
        Ok(())
    })
}
