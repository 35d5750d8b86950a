//! C ABI over `plus-core`.
//!
//! Objects are opaque handles created by `*_new`/`*_compute` and released with
//! the matching `*_free`. Every fallible call returns a [`PlusStatus`]; on
//! failure [`plus_last_error_message`] describes the cause for the calling
//! thread. Coordinates and breakpoint indices are 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use plus_core::path::{compute_path, solve_at_lambda, PathEvent, PathOptions, SolutionPath};
use plus_core::penalty::QuadSplinePenalty;
use plus_core::selection::{false_selection_bound, universal_lambda};
use plus_core::{Error, StandardizedDesign};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlusStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numeric = 4,
    OutOfRange = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlusPenaltyKind {
    L1 = 0,
    Mcp = 1,
    Scad = 2,
}

/// Event that ends a path segment.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlusEventKind {
    Origin = 0,
    Activate = 1,
    Deactivate = 2,
    KnotCross = 3,
    TerminateFit = 4,
    TerminateCap = 5,
    TerminateLimit = 6,
}

/// Opaque penalty handle.
pub struct PlusPenalty(QuadSplinePenalty);

/// Opaque standardized design handle.
pub struct PlusDesign(StandardizedDesign);

/// Opaque solution path handle.
pub struct PlusPath(SolutionPath);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PlusStatus {
    match e {
        Error::DimensionMismatch { .. } => PlusStatus::DimensionMismatch,
        Error::IndexOutOfRange { .. } | Error::BelowPathRange { .. } => PlusStatus::OutOfRange,
        Error::ZeroColumn { .. }
        | Error::RankDeficient
        | Error::Degenerate(_)
        | Error::NoResidualDf { .. } => PlusStatus::Numeric,
        _ => PlusStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), (PlusStatus, String)>>(f: F) -> PlusStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PlusStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PlusStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (PlusStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PlusStatus, String) {
    (PlusStatus::NullPointer, format!("{what} is null"))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn plus_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a penalty; `gamma` is ignored for `L1`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn plus_penalty_new(
    kind: PlusPenaltyKind,
    gamma: f64,
    out: *mut *mut PlusPenalty,
) -> PlusStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let pen = match kind {
            PlusPenaltyKind::L1 => Ok(QuadSplinePenalty::l1()),
            PlusPenaltyKind::Mcp => QuadSplinePenalty::mcp(gamma),
            PlusPenaltyKind::Scad => QuadSplinePenalty::scad(gamma),
        }
        .map_err(core_err)?;
        *out = Box::into_raw(Box::new(PlusPenalty(pen)));
        Ok(())
    })
}

/// # Safety
/// `pen` must come from [`plus_penalty_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn plus_penalty_free(pen: *mut PlusPenalty) {
    if !pen.is_null() {
        drop(Box::from_raw(pen));
    }
}

/// `rho(t; lambda)` for `t >= 0`.
///
/// # Safety
/// `pen` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plus_penalty_value(
    pen: *const PlusPenalty,
    t: f64,
    lambda: f64,
    out: *mut f64,
) -> PlusStatus {
    guard(|| {
        let pen = pen.as_ref().ok_or_else(|| null("pen"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = pen.0.value(t, lambda).map_err(core_err)?;
        Ok(())
    })
}

/// Derivative of `rho(t; lambda)` for `t > 0`.
///
/// # Safety
/// `pen` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plus_penalty_deriv(
    pen: *const PlusPenalty,
    t: f64,
    lambda: f64,
    out: *mut f64,
) -> PlusStatus {
    guard(|| {
        let pen = pen.as_ref().ok_or_else(|| null("pen"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = pen.0.deriv(t, lambda).map_err(core_err)?;
        Ok(())
    })
}

/// Maximum concavity of the unit-level penalty.
///
/// # Safety
/// `pen` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plus_penalty_max_concavity(
    pen: *const PlusPenalty,
    out: *mut f64,
) -> PlusStatus {
    guard(|| {
        let pen = pen.as_ref().ok_or_else(|| null("pen"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = pen.0.max_concavity();
        Ok(())
    })
}

/// Standardizes an `n x p` design given in row-major order.
///
/// # Safety
/// `data` must point to `n * p` readable doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn plus_design_new(
    data: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut PlusDesign,
) -> PlusStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n
            .checked_mul(p)
            .ok_or_else(|| (PlusStatus::InvalidArgument, "n * p overflows".to_string()))?;
        let values = std::slice::from_raw_parts(data, len);
        let raw = DMatrix::from_row_slice(n, p, values);
        let d = StandardizedDesign::standardize(&raw).map_err(core_err)?;
        *out = Box::into_raw(Box::new(PlusDesign(d)));
        Ok(())
    })
}

/// # Safety
/// `design` must come from [`plus_design_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn plus_design_free(design: *mut PlusDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// Column scale factors `||x_j|| / sqrt(n)` used to standardize; writes `p` values.
///
/// # Safety
/// `design` must be a live handle and `scales` hold `p` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn plus_design_col_scales(
    design: *const PlusDesign,
    scales: *mut f64,
) -> PlusStatus {
    guard(|| {
        let d = design.as_ref().ok_or_else(|| null("design"))?;
        if scales.is_null() {
            return Err(null("scales"));
        }
        let s = d.0.col_scales();
        ptr::copy_nonoverlapping(s.as_ptr(), scales, s.len());
        Ok(())
    })
}

/// Tracks the path for response `y` of length `n`. `max_steps = 0` uses the
/// default cap; `lambda_min <= 0` tracks to the end of the path.
///
/// # Safety
/// `design` and `pen` must be live handles, `y` must hold `n` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plus_path_compute(
    design: *const PlusDesign,
    y: *const f64,
    n: usize,
    pen: *const PlusPenalty,
    max_steps: usize,
    lambda_min: f64,
    out: *mut *mut PlusPath,
) -> PlusStatus {
    guard(|| {
        let d = design.as_ref().ok_or_else(|| null("design"))?;
        let pen = pen.as_ref().ok_or_else(|| null("pen"))?;
        if y.is_null() {
            return Err(null("y"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let y = std::slice::from_raw_parts(y, n);
        let mut opts = if lambda_min > 0.0 {
            PathOptions::down_to(lambda_min)
        } else {
            PathOptions::default()
        };
        if max_steps > 0 {
            opts.max_steps = max_steps;
        }
        let path = compute_path(&d.0, y, &pen.0, &opts).map_err(core_err)?;
        *out = Box::into_raw(Box::new(PlusPath(path)));
        Ok(())
    })
}

/// # Safety
/// `path` must come from [`plus_path_compute`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn plus_path_free(path: *mut PlusPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of breakpoints, including the origin and the terminal record.
///
/// # Safety
/// `path` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plus_path_len(path: *const PlusPath, out: *mut usize) -> PlusStatus {
    guard(|| {
        let path = path.as_ref().ok_or_else(|| null("path"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = path.0.breakpoints.len();
        Ok(())
    })
}

/// Reads breakpoint `k`: `tau = 1 / lambda`, the rescaled coefficients
/// `b = tau * beta` (`p` values), the event kind, its coordinate (or -1) and,
/// for knot crossings, the 1-based spline segment entered (otherwise 0).
///
/// # Safety
/// `path` must be a live handle; `b` must hold `p` writable doubles; the
/// remaining outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn plus_path_breakpoint(
    path: *const PlusPath,
    k: usize,
    tau: *mut f64,
    b: *mut f64,
    event: *mut PlusEventKind,
    coordinate: *mut i64,
    segment: *mut u32,
) -> PlusStatus {
    guard(|| {
        let path = path.as_ref().ok_or_else(|| null("path"))?;
        if tau.is_null()
            || b.is_null()
            || event.is_null()
            || coordinate.is_null()
            || segment.is_null()
        {
            return Err(null("output pointer"));
        }
        let bp = path.0.breakpoints.get(k).ok_or_else(|| {
            (
                PlusStatus::OutOfRange,
                format!(
                    "breakpoint {k} out of range (len {})",
                    path.0.breakpoints.len()
                ),
            )
        })?;
        *tau = bp.tau;
        ptr::copy_nonoverlapping(bp.b.as_ptr(), b, bp.b.len());
        let (kind, j, seg) = match bp.event {
            PathEvent::Origin => (PlusEventKind::Origin, -1, 0),
            PathEvent::Activate { j } => (PlusEventKind::Activate, j as i64, 0),
            PathEvent::Deactivate { j } => (PlusEventKind::Deactivate, j as i64, 0),
            PathEvent::KnotCross { j, segment } => {
                (PlusEventKind::KnotCross, j as i64, segment as u32)
            }
            PathEvent::TerminateFit => (PlusEventKind::TerminateFit, -1, 0),
            PathEvent::TerminateCap => (PlusEventKind::TerminateCap, -1, 0),
            PathEvent::TerminateLimit => (PlusEventKind::TerminateLimit, -1, 0),
        };
        *event = kind;
        *coordinate = j;
        *segment = seg;
        Ok(())
    })
}

/// Standardized-scale coefficients at `lambda` (`p` values), choosing the
/// sparsest crossing when the path meets the level more than once.
///
/// # Safety
/// `path` must be a live handle; `beta` must hold `p` writable doubles;
/// `crossings` may be null.
#[no_mangle]
pub unsafe extern "C" fn plus_path_solve(
    path: *const PlusPath,
    lambda: f64,
    beta: *mut f64,
    crossings: *mut usize,
) -> PlusStatus {
    guard(|| {
        let path = path.as_ref().ok_or_else(|| null("path"))?;
        if beta.is_null() {
            return Err(null("beta"));
        }
        let fit = solve_at_lambda(&path.0, lambda).map_err(core_err)?;
        ptr::copy_nonoverlapping(fit.beta.as_ptr(), beta, fit.beta.len());
        if !crossings.is_null() {
            *crossings = fit.crossings;
        }
        Ok(())
    })
}

/// `sigma * sqrt(2 log(p) / n)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plus_universal_lambda(
    sigma: f64,
    p: usize,
    n: usize,
    out: *mut f64,
) -> PlusStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = universal_lambda(sigma, p, n).map_err(core_err)?;
        Ok(())
    })
}

/// `2 (p - d_o) Phi(-lambda sqrt(n))`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plus_false_selection_bound(
    p: usize,
    d_o: usize,
    n: usize,
    lambda: f64,
    out: *mut f64,
) -> PlusStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = false_selection_bound(p, d_o, n, lambda).map_err(core_err)?;
        Ok(())
    })
}
