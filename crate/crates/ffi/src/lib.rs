//! C ABI over `sac_core`.
//!
//! Every fallible function returns a [`SacStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`sac_last_error_message`] on the calling thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sac_core::linear_errors::{
    bound_lower_spatial, bound_lower_temporal, bound_upper_spatial, bound_upper_temporal,
    bounds_full, fit_rate, full_error_exact, spatial_error_exact, temporal_error_exact, Modes,
};
use sac_core::noise::{coarsen_increments, NoiseTape};
use sac_core::nonlinearity::CubicCoefficients;
use sac_core::scheme::{DiscretizationParams, InitialValue, ModelParams, Scheme};
use sac_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SacStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    DimensionMismatch = 3,
    DegenerateFit = 4,
    BufferTooSmall = 5,
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SacBounds {
    pub lower: f64,
    pub upper: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SacRateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

/// Scheme at a fixed resolution together with its noise tape.
pub struct SacSimulator {
    scheme: Scheme,
    tape: NoiseTape,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SacStatus {
    match e {
        Error::DimensionMismatch { .. } => SacStatus::DimensionMismatch,
        Error::DegenerateFit(_) => SacStatus::DegenerateFit,
        Error::Io(_) | Error::Json(_) => SacStatus::Internal,
        _ => SacStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (SacStatus, String)>) -> SacStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SacStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SacStatus::Internal
        }
    }
}

fn core<T>(r: sac_core::Result<T>) -> Result<T, (SacStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (SacStatus, String) {
    (SacStatus::NullPointer, format!("{name} is null"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), (SacStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(value);
    Ok(())
}

fn modes(n: usize) -> Modes {
    if n == 0 {
        Modes::All
    } else {
        Modes::Finite(n)
    }
}

fn check_params(t: f64, nu: f64) -> Result<(), (SacStatus, String)> {
    if !(t > 0.0 && t.is_finite() && nu > 0.0 && nu.is_finite()) {
        return Err((
            SacStatus::InvalidArgument,
            "T and nu must be positive".into(),
        ));
    }
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
#[no_mangle]
pub extern "C" fn sac_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn sac_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}

/// `‖O_T − P_N O_T‖` for the linear heat equation.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn sac_spatial_error_exact(
    n: usize,
    t: f64,
    nu: f64,
    out: *mut f64,
) -> SacStatus {
    guard(|| write_out(out, core(spatial_error_exact(n, t, nu, 1e-12))?))
}

/// `‖P_N O_T − O^{M,N}_T‖`; `n = 0` selects all modes.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn sac_temporal_error_exact(
    m: usize,
    n: usize,
    t: f64,
    nu: f64,
    out: *mut f64,
) -> SacStatus {
    guard(|| write_out(out, core(temporal_error_exact(m, modes(n), t, nu))?))
}

/// `‖O_T − O^{M,N}_T‖`; `n = 0` selects all modes.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn sac_full_error_exact(
    m: usize,
    n: usize,
    t: f64,
    nu: f64,
    out: *mut f64,
) -> SacStatus {
    guard(|| write_out(out, core(full_error_exact(m, modes(n), t, nu))?))
}

/// # Safety
/// `out` must be valid for a write of one `SacBounds`.
#[no_mangle]
pub unsafe extern "C" fn sac_bounds_temporal(
    m: usize,
    n: usize,
    t: f64,
    nu: f64,
    out: *mut SacBounds,
) -> SacStatus {
    guard(|| {
        check_params(t, nu)?;
        if m == 0 {
            return Err((SacStatus::InvalidArgument, "M must be at least 1".into()));
        }
        write_out(
            out,
            SacBounds {
                lower: bound_lower_temporal(m, modes(n), t, nu),
                upper: bound_upper_temporal(m, t, nu),
            },
        )
    })
}

/// # Safety
/// `out` must be valid for a write of one `SacBounds`.
#[no_mangle]
pub unsafe extern "C" fn sac_bounds_spatial(
    n: usize,
    t: f64,
    nu: f64,
    out: *mut SacBounds,
) -> SacStatus {
    guard(|| {
        check_params(t, nu)?;
        if n == 0 {
            return Err((SacStatus::InvalidArgument, "N must be at least 1".into()));
        }
        write_out(
            out,
            SacBounds {
                lower: bound_lower_spatial(n, t, nu),
                upper: bound_upper_spatial(n, t, nu),
            },
        )
    })
}

/// # Safety
/// `out` must be valid for a write of one `SacBounds`.
#[no_mangle]
pub unsafe extern "C" fn sac_bounds_full(
    m: usize,
    n: usize,
    t: f64,
    nu: f64,
    out: *mut SacBounds,
) -> SacStatus {
    guard(|| {
        check_params(t, nu)?;
        if m == 0 {
            return Err((SacStatus::InvalidArgument, "M must be at least 1".into()));
        }
        let (lower, upper) = bounds_full(m, modes(n), t, nu);
        write_out(out, SacBounds { lower, upper })
    })
}

/// Least-squares fit of `ln y` against `ln x`.
///
/// # Safety
/// `xs` and `ys` must point to `len` readable doubles; `out` must be valid
/// for a write of one `SacRateFit`.
#[no_mangle]
pub unsafe extern "C" fn sac_fit_rate(
    xs: *const f64,
    ys: *const f64,
    len: usize,
    out: *mut SacRateFit,
) -> SacStatus {
    guard(|| {
        if xs.is_null() || ys.is_null() {
            return Err(null("xs/ys"));
        }
        let xs = std::slice::from_raw_parts(xs, len);
        let ys = std::slice::from_raw_parts(ys, len);
        let points: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        let fit = core(fit_rate(&points))?;
        write_out(
            out,
            SacRateFit {
                slope: fit.slope,
                intercept: fit.intercept,
                residual: fit.residual,
            },
        )
    })
}

/// Creates a simulator for `F(v) = Σ a_k v^k` with initial sine
/// coefficients `xi[0..xi_len]` (`xi` may be null when `xi_len = 0`).
///
/// # Safety
/// `a` must point to 4 readable doubles, `xi` to `xi_len` readable doubles,
/// and `out` must be valid for a pointer write. Release the handle with
/// [`sac_simulator_free`].
#[no_mangle]
pub unsafe extern "C" fn sac_simulator_new(
    t: f64,
    nu: f64,
    a: *const f64,
    xi: *const f64,
    xi_len: usize,
    m: usize,
    n: usize,
    gamma: f64,
    chi: f64,
    seed: u64,
    m_master: usize,
    n_master: usize,
    out: *mut *mut SacSimulator,
) -> SacStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        if a.is_null() {
            return Err(null("a"));
        }
        if xi.is_null() && xi_len > 0 {
            return Err(null("xi"));
        }
        let coeffs = core(CubicCoefficients::from_array(*(a as *const [f64; 4])))?;
        let xi = if xi_len == 0 {
            InitialValue::Zero
        } else {
            InitialValue::Coefficients(std::slice::from_raw_parts(xi, xi_len).to_vec())
        };
        let model = core(ModelParams::new(t, nu, coeffs, xi))?;
        let d = core(DiscretizationParams::new(m, n, gamma, chi))?;
        if m_master == 0 || !m_master.is_multiple_of(m) || n_master < n {
            return Err((
                SacStatus::InvalidArgument,
                format!("tape ({m_master}, {n_master}) cannot drive resolution ({m}, {n})"),
            ));
        }
        let tape = core(NoiseTape::new(seed, m_master, n_master, t))?;
        let scheme = core(Scheme::new(model, d))?;
        out.write(Box::into_raw(Box::new(SacSimulator { scheme, tape })));
        Ok(())
    })
}

/// Number of modes `N` of the simulator, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle from [`sac_simulator_new`].
#[no_mangle]
pub unsafe extern "C" fn sac_simulator_modes(sim: *const SacSimulator) -> usize {
    sim.as_ref().map_or(0, |s| s.scheme.discretization().n)
}

/// Simulates path `path` and writes `Y_T` (`N` doubles) and the number of
/// steps with the drift suppressed.
///
/// # Safety
/// `sim` must be a live handle, `out_y` must be valid for `out_len` writes
/// and `out_truncated` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sac_simulator_run(
    sim: *const SacSimulator,
    path: u64,
    out_y: *mut f64,
    out_len: usize,
    out_truncated: *mut usize,
) -> SacStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        if out_y.is_null() {
            return Err(null("out_y"));
        }
        let d = sim.scheme.discretization();
        if out_len < d.n {
            return Err((
                SacStatus::BufferTooSmall,
                format!("need {} doubles, got {out_len}", d.n),
            ));
        }
        let noise = core(sim.tape.path_noise(path, d.n))?;
        let (y, truncated) = core(
            sim.scheme
                .run_final(&core(coarsen_increments(&noise, d.m))?),
        )?;
        std::slice::from_raw_parts_mut(out_y, d.n).copy_from_slice(&y);
        if !out_truncated.is_null() {
            out_truncated.write(truncated);
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle from [`sac_simulator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sac_simulator_free(sim: *mut SacSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
