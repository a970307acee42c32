//! C interface to `cutproject`.
//!
//! Objects are opaque handles created by `cp_*` constructors and released by
//! the matching `cp_*_free`. Fallible calls return a [`CpStatus`] and write
//! their result through an out-pointer; on failure
//! [`cp_last_error_message`] describes the error for the calling thread.
//! Strings returned by the library are owned by the caller and released with
//! [`cp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cutproject::transforms;
use cutproject::{CutProjectScheme, DirectBox, Error, Patch, Scalar, Window};

/// Status codes of fallible calls.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidInput = 4,
    Resource = 5,
    Certification = 6,
    Verification = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Opaque cut-and-project scheme.
pub struct CpScheme(CutProjectScheme);

/// Opaque window in the internal space of some scheme.
pub struct CpWindow(Window);

/// Opaque finite patch of a point set.
pub struct CpPatch(Patch);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CpStatus {
    match e {
        Error::Parse(_) | Error::Json(_) => CpStatus::Parse,
        Error::EnumerationOverflow { .. } | Error::NotCovered { .. } | Error::Exhausted(_) => CpStatus::Resource,
        Error::CertificationFailed { .. } | Error::CommensurabilityUnknown { .. } | Error::NotInjective { .. } => {
            CpStatus::Certification
        }
        Error::WitnessViolated(_) => CpStatus::Verification,
        _ => CpStatus::InvalidInput,
    }
}

enum Fail {
    Null,
    Utf8,
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        Fail::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> CpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CpStatus::Ok,
        Ok(Err(Fail::Null)) => {
            set_error("null pointer argument".into());
            CpStatus::NullPointer
        }
        Ok(Err(Fail::Utf8)) => {
            set_error("string argument is not valid UTF-8".into());
            CpStatus::InvalidUtf8
        }
        Ok(Err(Fail::Lib(e))) => {
            let mut msg = e.to_string();
            if let Error::CertificationFailed { witness: Some(w), .. } = &e {
                msg.push_str("; witness: ");
                msg.push_str(w);
            }
            set_error(msg);
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CpStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null);
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8)
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null)
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null);
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null);
    }
    *out = CString::new(s).map_err(|_| Fail::Lib(Error::Parse("string contains a nul byte".into())))?.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn cp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The Fibonacci scheme `(ℝ, ℝ, ℤ[τ] Minkowski-embedded)`.
#[no_mangle]
pub extern "C" fn cp_scheme_fibonacci() -> *mut CpScheme {
    Box::into_raw(Box::new(CpScheme(CutProjectScheme::fibonacci())))
}

/// # Safety
/// `json` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cp_scheme_from_json(json: *const c_char, out: *mut *mut CpScheme) -> CpStatus {
    guard(|| {
        let s: CutProjectScheme = serde_json::from_str(text(json)?).map_err(Error::from)?;
        put(out, CpScheme(s))
    })
}

/// # Safety
/// `scheme` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cp_scheme_to_json(scheme: *const CpScheme, out: *mut *mut c_char) -> CpStatus {
    guard(|| {
        let s = handle(scheme)?;
        put_string(out, serde_json::to_string(&s.0).map_err(Error::from)?)
    })
}

/// Direct dimension, or 0 for NULL.
///
/// # Safety
/// `scheme` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cp_scheme_dim(scheme: *const CpScheme) -> usize {
    scheme.as_ref().map_or(0, |s| s.0.d())
}

/// Lattice rank, or 0 for NULL.
///
/// # Safety
/// `scheme` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cp_scheme_rank(scheme: *const CpScheme) -> usize {
    scheme.as_ref().map_or(0, |s| s.0.rank())
}

/// `dens(𝓛) = 1 / covolume` as a double.
///
/// # Safety
/// `scheme` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cp_scheme_density(scheme: *const CpScheme, out: *mut f64) -> CpStatus {
    guard(|| {
        let s = handle(scheme)?;
        if out.is_null() {
            return Err(Fail::Null);
        }
        *out = s.0.dens_lattice().to_f64();
        Ok(())
    })
}

/// # Safety
/// `scheme` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cp_scheme_free(scheme: *mut CpScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

/// Window in `ℝ` from interval notation, e.g. `(-1, tau-1]`.
///
/// # Safety
/// `notation` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cp_window_parse(notation: *const c_char, out: *mut *mut CpWindow) -> CpStatus {
    guard(|| put(out, CpWindow(Window::parse_real(text(notation)?)?)))
}

/// # Safety
/// `json` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cp_window_from_json(json: *const c_char, out: *mut *mut CpWindow) -> CpStatus {
    guard(|| {
        let w: Window = serde_json::from_str(text(json)?).map_err(Error::from)?;
        put(out, CpWindow(w))
    })
}

/// # Safety
/// `window` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cp_window_free(window: *mut CpWindow) {
    if !window.is_null() {
        drop(Box::from_raw(window));
    }
}

/// `Λ_W ∩ B`; `bbox` is `[lo, hi]` or `lo:hi` per axis, comma separated
/// (`-5:5,0:10`).
///
/// # Safety
/// Handles must be live, `bbox` NUL-terminated, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cp_generate(
    scheme: *const CpScheme,
    window: *const CpWindow,
    bbox: *const c_char,
    out: *mut *mut CpPatch,
) -> CpStatus {
    guard(|| {
        let s = handle(scheme)?;
        let w = handle(window)?;
        let b = DirectBox::parse(text(bbox)?)?;
        put(out, CpPatch(s.0.project_points(&b, &w.0)?))
    })
}

/// Number of points, or 0 for NULL.
///
/// # Safety
/// `patch` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cp_patch_len(patch: *const CpPatch) -> usize {
    patch.as_ref().map_or(0, |p| p.0.len())
}

/// Point dimension, or 0 for NULL.
///
/// # Safety
/// `patch` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cp_patch_dim(patch: *const CpPatch) -> usize {
    patch.as_ref().map_or(0, |p| p.0.bbox.dim())
}

/// Writes the points as doubles, row-major, into `buf` of length `cap`
/// (at least `len * dim`).
///
/// # Safety
/// `patch` must be a live handle and `buf` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn cp_patch_points(patch: *const CpPatch, buf: *mut f64, cap: usize) -> CpStatus {
    let mut short = false;
    let status = guard(|| {
        let p = handle(patch)?;
        let need = p.0.len() * p.0.bbox.dim();
        if cap < need {
            set_error(format!("buffer holds {cap} values, {need} needed"));
            short = true;
            return Ok(());
        }
        if need > 0 && buf.is_null() {
            return Err(Fail::Null);
        }
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for (slot, x) in dst.iter_mut().zip(p.0.approx().into_iter().flatten()) {
            *slot = x;
        }
        Ok(())
    });
    if short {
        CpStatus::BufferTooSmall
    } else {
        status
    }
}

/// Exact patch JSON (points as exact expressions).
///
/// # Safety
/// `patch` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cp_patch_to_json(patch: *const CpPatch, out: *mut *mut c_char) -> CpStatus {
    guard(|| {
        let p = handle(patch)?;
        put_string(out, serde_json::to_string(&p.0).map_err(Error::from)?)
    })
}

/// # Safety
/// `patch` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cp_patch_free(patch: *mut CpPatch) {
    if !patch.is_null() {
        drop(Box::from_raw(patch));
    }
}

/// Translation scheme of the shift `shift` (comma-separated exact
/// expressions), decided up to `bound`. Writes the new scheme and the
/// certificate JSON; `certificate` may be NULL.
///
/// # Safety
/// `scheme` must be a live handle, `shift` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cp_translate(
    scheme: *const CpScheme,
    shift: *const c_char,
    bound: u64,
    out: *mut *mut CpScheme,
    certificate: *mut *mut c_char,
) -> CpStatus {
    guard(|| {
        let s = handle(scheme)?;
        let a = text(shift)?.split(',').map(Scalar::parse).collect::<Result<Vec<_>, _>>()?;
        let t = transforms::translate_cps(&s.0, &a, bound, &[])?;
        if !certificate.is_null() {
            put_string(certificate, serde_json::to_string(&t.certificate).map_err(Error::from)?)?;
        }
        put(out, CpScheme(t.scheme))
    })
}
