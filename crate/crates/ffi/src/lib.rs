//! C ABI for the binno solver.
//!
//! Matrices and reports are opaque handles owned by the caller once returned
//! and released with the matching `*_free` function. Every entry point returns
//! a [`BinnoStatus`]; on failure [`binno_last_error`] describes the cause for
//! the calling thread. Matrix data crosses the boundary in row-major order.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use binno::bilevel::SolverError;
use binno::data::{self, SyntheticSpec};
use binno::matrix::{DenseMatrix, MatrixError};
use binno::metrics::{self, MetricError};
use binno::slrf::{solve_slrf, SlrfConfig, SlrfParams};
use binno::{RunReport, SolverConfig, Termination};
use libc::{c_char, c_int};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinnoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    /// The solver stopped early; outputs are still written.
    Stalled = 5,
    SolverFailure = 6,
    Io = 7,
    Panic = 8,
}

/// Dense real matrix.
pub struct BinnoMatrix {
    inner: DenseMatrix,
}

/// Run report of a solve.
pub struct BinnoReport {
    inner: RunReport,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BinnoSlrfParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub rank: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BinnoSolverOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub nu_min: f64,
    pub safety_factor: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinnoTrace {
    Psi1 = 0,
    Psi2 = 1,
    Alpha = 2,
    Beta = 3,
    Nu = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: BinnoStatus, msg: impl Into<String>) -> BinnoStatus {
    set_error(msg);
    status
}

fn matrix_status(e: &MatrixError) -> BinnoStatus {
    match e {
        MatrixError::DimensionMismatch { .. } | MatrixError::InvalidShape { .. } => BinnoStatus::DimensionMismatch,
        MatrixError::NonFinite { .. } => BinnoStatus::NonFinite,
        MatrixError::NoConvergence { .. } => BinnoStatus::SolverFailure,
    }
}

fn solver_status(e: &SolverError) -> BinnoStatus {
    match e {
        SolverError::Matrix(m) => matrix_status(m),
        SolverError::InvalidArgument(_) => BinnoStatus::InvalidArgument,
        SolverError::StalledStepsize { .. } => BinnoStatus::Stalled,
        _ => BinnoStatus::SolverFailure,
    }
}

fn guard(f: impl FnOnce() -> BinnoStatus) -> BinnoStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(BinnoStatus::Panic, "internal panic"),
    }
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn binno_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn binno_slrf_params_default() -> BinnoSlrfParams {
    let p = SlrfParams::default();
    BinnoSlrfParams {
        lambda1: p.lambda1,
        lambda2: p.lambda2,
        gamma1: p.gamma1,
        gamma2: p.gamma2,
        rank: p.rank,
    }
}

#[no_mangle]
pub extern "C" fn binno_solver_options_default() -> BinnoSolverOptions {
    let s = SolverConfig::default();
    BinnoSolverOptions {
        max_iters: s.max_iters,
        tol: s.tol,
        nu_min: s.nu_min,
        safety_factor: 1.0,
        seed: 0,
    }
}

/// Copies `rows * cols` row-major values into a new matrix.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn binno_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut BinnoMatrix,
) -> BinnoStatus {
    guard(|| {
        let Some(len) = rows.checked_mul(cols) else {
            return fail(BinnoStatus::InvalidArgument, "rows * cols overflows");
        };
        if out.is_null() || (data.is_null() && len > 0) {
            return fail(BinnoStatus::NullPointer, "null pointer argument");
        }
        let values = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(data, len).to_vec()
        };
        match DenseMatrix::new(rows, cols, values) {
            Ok(m) => {
                *out = boxed(BinnoMatrix { inner: m });
                BinnoStatus::Ok
            }
            Err(e) => fail(matrix_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `m` must be NULL or a handle returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn binno_matrix_free(m: *mut BinnoMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn binno_matrix_rows(m: *const BinnoMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.rows())
}

/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn binno_matrix_cols(m: *const BinnoMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.cols())
}

/// Copies the entries row-major into `out`, which holds `len` doubles.
///
/// # Safety
/// `m` must be a live matrix handle and `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn binno_matrix_copy_data(m: *const BinnoMatrix, out: *mut f64, len: usize) -> BinnoStatus {
    guard(|| {
        let (Some(m), false) = (m.as_ref(), out.is_null()) else {
            return fail(BinnoStatus::NullPointer, "null pointer argument");
        };
        let src = m.inner.as_slice();
        if len != src.len() {
            return fail(
                BinnoStatus::DimensionMismatch,
                format!("buffer holds {len} values, matrix has {}", src.len()),
            );
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, len);
        BinnoStatus::Ok
    })
}

/// Reads a headerless comma-separated matrix.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn binno_matrix_load_csv(path: *const c_char, out: *mut *mut BinnoMatrix) -> BinnoStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(BinnoStatus::NullPointer, "null pointer argument");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(BinnoStatus::InvalidArgument, "path is not valid UTF-8");
        };
        match data::load_matrix_csv(path) {
            Ok(m) => {
                *out = boxed(BinnoMatrix { inner: m });
                BinnoStatus::Ok
            }
            Err(e) => fail(BinnoStatus::Io, e.to_string()),
        }
    })
}

/// Generates the observed matrix of a synthetic sparse factorization instance.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn binno_generate_synthetic(
    m: usize,
    n: usize,
    rank: usize,
    sparsity: f64,
    noise_std: f64,
    seed: u64,
    out: *mut *mut BinnoMatrix,
) -> BinnoStatus {
    guard(|| {
        if out.is_null() {
            return fail(BinnoStatus::NullPointer, "null pointer argument");
        }
        let spec = SyntheticSpec {
            m,
            n,
            r: rank,
            sparsity,
            noise_std,
            seed,
        };
        match data::generate(&spec) {
            Ok(inst) => {
                *out = boxed(BinnoMatrix { inner: inst.m_observed });
                BinnoStatus::Ok
            }
            Err(e) => fail(BinnoStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Factorizes `m` as `X Y`. Writes all three outputs on `Ok` and on `Stalled`.
/// `options` may be NULL for defaults.
///
/// # Safety
/// `m` and `params` must be valid; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn binno_solve_slrf(
    m: *const BinnoMatrix,
    params: *const BinnoSlrfParams,
    options: *const BinnoSolverOptions,
    out_x: *mut *mut BinnoMatrix,
    out_y: *mut *mut BinnoMatrix,
    out_report: *mut *mut BinnoReport,
) -> BinnoStatus {
    guard(|| {
        let (Some(m), Some(p)) = (m.as_ref(), params.as_ref()) else {
            return fail(BinnoStatus::NullPointer, "null pointer argument");
        };
        if out_x.is_null() || out_y.is_null() || out_report.is_null() {
            return fail(BinnoStatus::NullPointer, "null output pointer");
        }
        let o = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| binno_solver_options_default());
        let params = SlrfParams {
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            gamma1: p.gamma1,
            gamma2: p.gamma2,
            rank: p.rank,
        };
        let config = SlrfConfig {
            solver: SolverConfig {
                max_iters: o.max_iters,
                tol: o.tol,
                nu_min: o.nu_min,
            },
            safety_factor: o.safety_factor,
            seed: o.seed,
        };
        match solve_slrf(&m.inner, params, &config) {
            Ok(sol) => {
                let stalled = sol.report.termination == Termination::StalledStepsize;
                *out_x = boxed(BinnoMatrix { inner: sol.x });
                *out_y = boxed(BinnoMatrix { inner: sol.y });
                *out_report = boxed(BinnoReport { inner: sol.report });
                if stalled {
                    fail(BinnoStatus::Stalled, "stepsize fell below nu_min")
                } else {
                    BinnoStatus::Ok
                }
            }
            Err(e) => fail(solver_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `r` must be NULL or a handle returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn binno_report_free(r: *mut BinnoReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn binno_report_iterations(r: *const BinnoReport) -> usize {
    r.as_ref().map_or(0, |r| r.inner.iterations)
}

/// 1 if the run met the stopping tolerance, 0 otherwise.
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn binno_report_converged(r: *const BinnoReport) -> c_int {
    r.as_ref().map_or(0, |r| c_int::from(r.inner.converged))
}

/// Relative reconstruction error of the run, NaN if unavailable.
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn binno_report_relative_error(r: *const BinnoReport) -> f64 {
    r.as_ref()
        .and_then(|r| r.inner.metrics)
        .map_or(f64::NAN, |m| m.relative_error)
}

/// Length of a per-iteration trace.
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn binno_report_trace_len(r: *const BinnoReport, which: BinnoTrace) -> usize {
    r.as_ref().map_or(0, |r| trace(&r.inner, which).len())
}

fn trace(r: &RunReport, which: BinnoTrace) -> &[f64] {
    match which {
        BinnoTrace::Psi1 => &r.psi1_trace,
        BinnoTrace::Psi2 => &r.psi2_trace,
        BinnoTrace::Alpha => &r.alpha_trace,
        BinnoTrace::Beta => &r.beta_trace,
        BinnoTrace::Nu => &r.nu_trace,
    }
}

/// Copies up to `len` entries of a trace into `out`; `written` receives the count.
///
/// # Safety
/// `r` must be a live report handle, `out` must hold `len` doubles and
/// `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn binno_report_copy_trace(
    r: *const BinnoReport,
    which: BinnoTrace,
    out: *mut f64,
    len: usize,
    written: *mut usize,
) -> BinnoStatus {
    guard(|| {
        let Some(r) = r.as_ref() else {
            return fail(BinnoStatus::NullPointer, "null report");
        };
        if written.is_null() || (out.is_null() && len > 0) {
            return fail(BinnoStatus::NullPointer, "null pointer argument");
        }
        let t = trace(&r.inner, which);
        let n = t.len().min(len);
        if n > 0 {
            ptr::copy_nonoverlapping(t.as_ptr(), out, n);
        }
        *written = n;
        BinnoStatus::Ok
    })
}

/// Report as a JSON string; release it with [`binno_string_free`]. NULL on failure.
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn binno_report_to_json(r: *const BinnoReport) -> *mut c_char {
    let Some(r) = r.as_ref() else {
        set_error("null report");
        return ptr::null_mut();
    };
    match serde_json::to_string(&r.inner).map(CString::new) {
        Ok(Ok(s)) => s.into_raw(),
        _ => {
            set_error("report serialization failed");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be NULL or a string returned by [`binno_report_to_json`].
#[no_mangle]
pub unsafe extern "C" fn binno_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn metric_status(e: &MetricError) -> BinnoStatus {
    match e {
        MetricError::Matrix(m) => matrix_status(m),
        _ => BinnoStatus::InvalidArgument,
    }
}

/// `||m - l||_F / ||m||_F`.
///
/// # Safety
/// `m`, `l` must be live matrix handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn binno_relative_error(
    m: *const BinnoMatrix,
    l: *const BinnoMatrix,
    out: *mut f64,
) -> BinnoStatus {
    guard(|| {
        let (Some(m), Some(l), false) = (m.as_ref(), l.as_ref(), out.is_null()) else {
            return fail(BinnoStatus::NullPointer, "null pointer argument");
        };
        match metrics::relative_error(&m.inner, &l.inner) {
            Ok(v) => {
                *out = v;
                BinnoStatus::Ok
            }
            Err(e) => fail(metric_status(&e), e.to_string()),
        }
    })
}

/// Peak signal-to-noise ratio in dB; `+inf` for identical inputs.
///
/// # Safety
/// `reference`, `estimate` must be live matrix handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn binno_psnr(
    reference: *const BinnoMatrix,
    estimate: *const BinnoMatrix,
    max_value: f64,
    out: *mut f64,
) -> BinnoStatus {
    guard(|| {
        let (Some(a), Some(b), false) = (reference.as_ref(), estimate.as_ref(), out.is_null()) else {
            return fail(BinnoStatus::NullPointer, "null pointer argument");
        };
        match metrics::psnr(&a.inner, &b.inner, max_value) {
            Ok(v) => {
                *out = v;
                BinnoStatus::Ok
            }
            Err(e) => fail(metric_status(&e), e.to_string()),
        }
    })
}
