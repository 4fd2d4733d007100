//! C ABI over `oblique-core`.
//!
//! Every function returns an [`OblStatus`]. On failure the message is kept per thread and can
//! be read with [`obl_last_error`]. Handles are opaque and must be released with their
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use oblique_core::counterexamples::{certify_wedge, cusp_window, WedgeExample};
use oblique_core::experiment::{run, ExperimentConfig, RunOptions};
use oblique_core::geometry::DomainConfig;
use oblique_core::regdist::RegDistField;
use oblique_core::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OblStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigError = 3,
    InvalidArgument = 4,
    NumericalFailure = 5,
    IoError = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A graph domain together with its regularized distance.
pub struct OblDomain {
    field: RegDistField,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(e: &Error) -> OblStatus {
    match e {
        Error::Config { .. } => OblStatus::ConfigError,
        Error::Io(_) => OblStatus::IoError,
        Error::InvalidInput(_)
        | Error::InvalidParameter(_)
        | Error::Precondition(_)
        | Error::OutOfChart(_)
        | Error::DegenerateInput(_)
        | Error::NonDifferentiable(_)
        | Error::BoundarySingularity(_) => OblStatus::InvalidArgument,
        _ => OblStatus::NumericalFailure,
    }
}

/// Runs `body`, converting errors and panics into status codes.
fn guarded(body: impl FnOnce() -> Result<(), (OblStatus, String)>) -> OblStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => OblStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside oblique-core");
            OblStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (OblStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, (OblStatus, String)> {
    if ptr.is_null() {
        return Err((OblStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| (OblStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn non_null<T>(ptr: *const T, what: &str) -> Result<(), (OblStatus, String)> {
    if ptr.is_null() {
        Err((OblStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn obl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated).
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn obl_last_error(buf: *mut c_char, len: usize) -> OblStatus {
    if buf.is_null() {
        return OblStatus::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes_with_nul();
        if bytes.len() > len {
            return OblStatus::BufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, bytes.len());
        OblStatus::Ok
    })
}

/// Builds a domain from its JSON description, e.g.
/// `{"type": "sawtooth", "slope": 0.05, "delta": 0.5, "eps0": 0.05, "R0": 1}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obl_domain_from_json(json: *const c_char, out: *mut *mut OblDomain) -> OblStatus {
    guarded(|| {
        non_null(out, "out")?;
        let text = read_str(json, "json")?;
        let config: DomainConfig =
            serde_json::from_str(text).map_err(|e| (OblStatus::ConfigError, format!("domain: {e}")))?;
        let domain = config.build().map_err(core_err)?;
        let field = RegDistField::new(domain).map_err(core_err)?;
        *out = Box::into_raw(Box::new(OblDomain { field }));
        Ok(())
    })
}

/// Releases a domain. Null is ignored.
///
/// # Safety
/// `domain` must come from [`obl_domain_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn obl_domain_free(domain: *mut OblDomain) {
    if !domain.is_null() {
        drop(Box::from_raw(domain));
    }
}

/// Dimension `d` of the domain, or 0 for a null handle.
///
/// # Safety
/// `domain` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn obl_domain_dim(domain: *const OblDomain) -> usize {
    domain.as_ref().map_or(0, |d| d.field.domain.dim)
}

/// Regularized distance `ρ0(y)` and, when `grad` is non-null, `Dρ0(y)` (`dim` entries).
///
/// # Safety
/// `y` must hold `dim` values, `rho` must be valid and `grad` null or `dim` writable values.
#[no_mangle]
pub unsafe extern "C" fn obl_regdist(domain: *const OblDomain, y: *const f64, dim: usize, rho: *mut f64, grad: *mut f64) -> OblStatus {
    guarded(|| {
        let d = domain.as_ref().ok_or((OblStatus::NullPointer, "domain is null".into()))?;
        non_null(y, "y")?;
        non_null(rho, "rho")?;
        if dim != d.field.domain.dim {
            return Err((OblStatus::InvalidArgument, format!("point has {dim} coordinates, domain has {}", d.field.domain.dim)));
        }
        let point = std::slice::from_raw_parts(y, dim);
        let (value, g) = d.field.value_and_grad(point).map_err(core_err)?;
        *rho = value;
        if !grad.is_null() {
            std::slice::from_raw_parts_mut(grad, dim).copy_from_slice(&g);
        }
        Ok(())
    })
}

/// Admissible `β` window `(lower, upper]` of the cusp example; `nonempty` is 0 when empty.
///
/// # Safety
/// All output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn obl_cusp_window(p: f64, eps: f64, lower: *mut f64, upper: *mut f64, nonempty: *mut i32) -> OblStatus {
    guarded(|| {
        non_null(lower, "lower")?;
        non_null(upper, "upper")?;
        non_null(nonempty, "nonempty")?;
        match cusp_window(p, eps).map_err(core_err)? {
            Some(w) => {
                *lower = w.lower;
                *upper = w.upper;
                *nonempty = 1;
            }
            None => {
                *lower = f64::NAN;
                *upper = f64::NAN;
                *nonempty = 0;
            }
        }
        Ok(())
    })
}

/// Wedge certificate at one exponent: `divergent` is 1 when `‖D²u‖_p` diverges at the tip,
/// `slope` the fitted shell slope, `all_pass` 1 when every verdict holds.
///
/// # Safety
/// All output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn obl_certify_wedge(
    theta0: f64,
    p: f64,
    divergent: *mut i32,
    slope: *mut f64,
    all_pass: *mut i32,
) -> OblStatus {
    guarded(|| {
        non_null(divergent, "divergent")?;
        non_null(slope, "slope")?;
        non_null(all_pass, "all_pass")?;
        let ex = WedgeExample::new(theta0, 1.0).map_err(core_err)?;
        let report = certify_wedge(&ex, &[p], 1000, (1, 40)).map_err(core_err)?;
        *slope = report.get(&format!("d2u_p{p}.slope")).unwrap_or(f64::NAN);
        *divergent = i32::from(p >= ex.critical_p());
        *all_pass = i32::from(report.all_pass());
        Ok(())
    })
}

/// Runs an experiment config (JSON text) and writes its artifacts under `out_dir`.
/// `exit_code` receives the CLI exit code: 0 ok, 1 invariant failure, 2 config error.
///
/// # Safety
/// `config_json` and `out_dir` must be NUL-terminated strings, `exit_code` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obl_run_experiment(config_json: *const c_char, out_dir: *const c_char, jobs: usize, exit_code: *mut i32) -> OblStatus {
    guarded(|| {
        non_null(exit_code, "exit_code")?;
        let text = read_str(config_json, "config_json")?;
        let dir = read_str(out_dir, "out_dir")?;
        let config = match ExperimentConfig::from_json(text) {
            Ok(c) => c,
            Err(e) => {
                *exit_code = 2;
                return Err(core_err(e));
            }
        };
        let summary = run(&config, Path::new(dir), RunOptions { jobs }).map_err(|e| {
            *exit_code = if matches!(e, Error::Config { .. }) { 2 } else { 1 };
            core_err(e)
        })?;
        *exit_code = summary.exit_status() as i32;
        Ok(())
    })
}
