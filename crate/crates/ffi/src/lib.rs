//! C ABI over `zigzag-dirac`: opaque domain and operator handles, dense
//! spectra, and JSON verification reports. Every entry point returns a
//! [`ZzStatus`]; the message of the last failure on the calling thread is
//! available through [`zz_last_error_message`].

use num_complex::Complex64;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use zigzag_dirac::assembly::{assemble_dirac, DiracVariant};
use zigzag_dirac::cli::exit_code_for;
use zigzag_dirac::domain::{voxelize, Aabb, DomainSpec, VoxelDomain};
use zigzag_dirac::eigen::dense_hermitian_eigenvalues;
use zigzag_dirac::report::VerificationReport;
use zigzag_dirac::sparse::SparseOperator;
use zigzag_dirac::spectral_map::{verify_theorem, TheoremConfig};
use zigzag_dirac::Error;

/// Result codes. The first four match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZzStatus {
    Ok = 0,
    CheckFailed = 1,
    InvalidInput = 2,
    NoConvergence = 3,
    NullPointer = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Which operator layout to assemble.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZzVariant {
    /// Upper components on all nodes, lower components on interior nodes.
    ZigzagA = 0,
    /// The chirality-equivalent layout with the roles swapped.
    ZigzagB = 1,
}

/// Voxelized domain.
pub struct ZzDomain(VoxelDomain);

/// Assembled sparse Hermitian operator.
pub struct ZzOperator(SparseOperator);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_for(e: &Error) -> ZzStatus {
    match exit_code_for(e) {
        3 => ZzStatus::NoConvergence,
        2 => ZzStatus::InvalidInput,
        _ => ZzStatus::CheckFailed,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<ZzStatus, (ZzStatus, String)>) -> ZzStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            ZzStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (ZzStatus, String) {
    (status_for(&e), e.to_string())
}

fn null(name: &str) -> (ZzStatus, String) {
    (ZzStatus::NullPointer, format!("{name} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (ZzStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| (ZzStatus::InvalidInput, format!("{name} is not UTF-8")))
}

unsafe fn read_point(p: *const f64) -> [f64; 3] {
    unsafe { [*p, *p.add(1), *p.add(2)] }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior nul removed").into_raw()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn zz_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when there is no error.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn zz_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                unsafe {
                    ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                    *buf.add(n) = 0;
                }
            }
            bytes.len()
        }
    })
}

/// Voxelizes a domain given as JSON, e.g. `{"kind":"ball","center":[0,0,0],"radius":1}`.
/// `bbox_min` and `bbox_max` point to three doubles each; when both are null
/// the domain's bounding box is used.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out` must be writable; the
/// box pointers must be null or valid for three doubles.
#[no_mangle]
pub unsafe extern "C" fn zz_domain_voxelize(
    spec_json: *const c_char,
    h: f64,
    bbox_min: *const f64,
    bbox_max: *const f64,
    out: *mut *mut ZzDomain,
) -> ZzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = unsafe { read_str(spec_json, "spec_json") }?;
        let spec: DomainSpec = serde_json::from_str(text).map_err(|e| (ZzStatus::InvalidInput, format!("domain spec: {e}")))?;
        spec.validate().map_err(lib_err)?;
        let bbox = match (bbox_min.is_null(), bbox_max.is_null()) {
            (false, false) => unsafe { Aabb::new(read_point(bbox_min), read_point(bbox_max)) },
            (true, true) => spec
                .bounding_box()
                .ok_or_else(|| (ZzStatus::InvalidInput, "unbounded domain needs a box".to_string()))?,
            _ => return Err((ZzStatus::NullPointer, "bbox_min and bbox_max must both be given".into())),
        };
        let d = voxelize(&spec, h, &bbox).map_err(lib_err)?;
        unsafe { *out = Box::into_raw(Box::new(ZzDomain(d))) };
        Ok(ZzStatus::Ok)
    })
}

/// Unit cube with `cells` cells per side.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zz_domain_unit_cube(cells: usize, out: *mut *mut ZzDomain) -> ZzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if cells == 0 {
            return Err((ZzStatus::InvalidInput, "cells must be positive".into()));
        }
        let d = voxelize(&DomainSpec::unit_cube(), 1.0 / cells as f64, &Aabb::new([0.0; 3], [1.0; 3])).map_err(lib_err)?;
        unsafe { *out = Box::into_raw(Box::new(ZzDomain(d))) };
        Ok(ZzStatus::Ok)
    })
}

/// Node counts: all nodes, interior nodes.
///
/// # Safety
/// `domain` must come from this library; the outputs must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn zz_domain_counts(domain: *const ZzDomain, num_all: *mut usize, num_interior: *mut usize) -> ZzStatus {
    guard(|| {
        let d = unsafe { domain.as_ref() }.ok_or_else(|| null("domain"))?;
        unsafe {
            if let Some(a) = num_all.as_mut() {
                *a = d.0.num_all();
            }
            if let Some(i) = num_interior.as_mut() {
                *i = d.0.num_interior();
            }
        }
        Ok(ZzStatus::Ok)
    })
}

/// # Safety
/// `domain` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn zz_domain_free(domain: *mut ZzDomain) {
    if !domain.is_null() {
        drop(unsafe { Box::from_raw(domain) });
    }
}

/// Assembles the zigzag Dirac operator with mass `m`.
///
/// # Safety
/// `domain` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zz_operator_assemble(domain: *const ZzDomain, m: f64, variant: ZzVariant, out: *mut *mut ZzOperator) -> ZzStatus {
    guard(|| {
        let d = unsafe { domain.as_ref() }.ok_or_else(|| null("domain"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = match variant {
            ZzVariant::ZigzagA => DiracVariant::A,
            ZzVariant::ZigzagB => DiracVariant::B,
        };
        let op = assemble_dirac(&d.0, m, v).map_err(lib_err)?;
        unsafe { *out = Box::into_raw(Box::new(ZzOperator(op))) };
        Ok(ZzStatus::Ok)
    })
}

/// Dimension and stored entries of an operator.
///
/// # Safety
/// `op` must come from this library; the outputs must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn zz_operator_shape(op: *const ZzOperator, dim: *mut usize, nnz: *mut usize) -> ZzStatus {
    guard(|| {
        let o = unsafe { op.as_ref() }.ok_or_else(|| null("op"))?;
        unsafe {
            if let Some(d) = dim.as_mut() {
                *d = o.0.nrows();
            }
            if let Some(n) = nnz.as_mut() {
                *n = o.0.nnz();
            }
        }
        Ok(ZzStatus::Ok)
    })
}

/// `y = A x` with complex vectors stored as interleaved `re, im` pairs;
/// `len` is the number of doubles in each buffer and must equal `2·dim`.
///
/// # Safety
/// `x` and `y` must be valid for `len` doubles and must not overlap.
#[no_mangle]
pub unsafe extern "C" fn zz_operator_apply(op: *const ZzOperator, x: *const f64, y: *mut f64, len: usize) -> ZzStatus {
    guard(|| {
        let o = unsafe { op.as_ref() }.ok_or_else(|| null("op"))?;
        if x.is_null() || y.is_null() {
            return Err(null("x or y"));
        }
        let n = o.0.nrows();
        if len != 2 * n {
            return Err((ZzStatus::InvalidInput, format!("buffer length {len} != 2 * {n}")));
        }
        let xs = unsafe { std::slice::from_raw_parts(x, len) };
        let input: Vec<Complex64> = xs.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let output = o.0.apply(&input);
        let ys = unsafe { std::slice::from_raw_parts_mut(y, len) };
        for (pair, z) in ys.chunks_exact_mut(2).zip(output) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        Ok(ZzStatus::Ok)
    })
}

/// All eigenvalues in ascending order via a dense solve. `written` receives
/// the dimension; if `cap` is smaller, nothing is copied and
/// `BufferTooSmall` is returned.
///
/// # Safety
/// `values` must be valid for `cap` doubles (or null with `cap = 0`);
/// `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zz_operator_dense_eigenvalues(
    op: *const ZzOperator,
    dense_cap: usize,
    values: *mut f64,
    cap: usize,
    written: *mut usize,
) -> ZzStatus {
    guard(|| {
        let o = unsafe { op.as_ref() }.ok_or_else(|| null("op"))?;
        let w = unsafe { written.as_mut() }.ok_or_else(|| null("written"))?;
        *w = o.0.nrows();
        if cap < o.0.nrows() {
            return Err((ZzStatus::BufferTooSmall, format!("need {} doubles, got {cap}", o.0.nrows())));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        let e = dense_hermitian_eigenvalues(&o.0, dense_cap).map_err(lib_err)?.eigenvalues;
        unsafe { ptr::copy_nonoverlapping(e.as_ptr(), values, e.len()) };
        Ok(ZzStatus::Ok)
    })
}

/// # Safety
/// `op` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn zz_operator_free(op: *mut ZzOperator) {
    if !op.is_null() {
        drop(unsafe { Box::from_raw(op) });
    }
}

fn emit_report(report: &VerificationReport, out: *mut *mut c_char) -> ZzStatus {
    unsafe { *out = into_c_string(report.to_json()) };
    if report.passed() { ZzStatus::Ok } else { ZzStatus::CheckFailed }
}

/// Verifies the map between the induced Laplacian and the Dirac spectrum on
/// `window` clusters. Writes the JSON report to `report_json` (release with
/// [`zz_string_free`]) and returns `CheckFailed` if any check fails.
///
/// # Safety
/// `domain` must come from this library; `report_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zz_verify_theorem(domain: *const ZzDomain, m: f64, window: usize, report_json: *mut *mut c_char) -> ZzStatus {
    guard(|| {
        let d = unsafe { domain.as_ref() }.ok_or_else(|| null("domain"))?;
        if report_json.is_null() {
            return Err(null("report_json"));
        }
        let cfg = TheoremConfig { window, ..Default::default() };
        let report = verify_theorem(&d.0, m, &cfg).map_err(lib_err)?;
        Ok(emit_report(&report, report_json))
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn zz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
