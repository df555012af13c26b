//! C ABI over the sapt-vqe engine.
//!
//! Bundles and reports are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`SaptStatus`]; the message of the last failure on the calling thread is
//! available from [`sapt_last_error`].

use sapt_vqe::bundle::{read_bundle, IntegralBundle};
use sapt_vqe::pipeline::{run_bundle, RunConfig};
use sapt_vqe::sapt::SaptReport;
use sapt_vqe::statevector::resource_count;
use sapt_vqe::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaptStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Numerical = 3,
    Io = 4,
    InvalidUtf8 = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaptTerm {
    Elst = 0,
    Exch = 1,
    IndU = 2,
    ExchIndU = 3,
    Disp = 4,
    ExchDisp = 5,
    Total = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SaptResources {
    pub n_qubits: usize,
    pub n_params: usize,
    pub n_two_qubit_gates: usize,
    pub depth: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SaptBundleDims {
    pub n_orb_a: usize,
    pub n_orb_b: usize,
    pub n_elec_a: usize,
    pub n_elec_b: usize,
    pub n_active_a: usize,
    pub n_active_b: usize,
}

/// Opaque integral bundle.
pub struct SaptBundle(IntegralBundle);

/// Opaque SAPT report.
pub struct SaptReportHandle(SaptReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SaptStatus {
    match e.exit_code() {
        2 => SaptStatus::Validation,
        4 => SaptStatus::Io,
        _ => SaptStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (SaptStatus, String)>) -> SaptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SaptStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside sapt-vqe".into());
            SaptStatus::Panic
        }
    }
}

fn engine(e: Error) -> (SaptStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SaptStatus, String) {
    (SaptStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SaptStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (SaptStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

/// Message of the last failed call on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sapt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sapt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads and validates a bundle file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sapt_bundle_read(path: *const c_char, out: *mut *mut SaptBundle) -> SaptStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let b = read_bundle(path).map_err(engine)?;
        *out = Box::into_raw(Box::new(SaptBundle(b)));
        Ok(())
    })
}

/// Parses and validates a bundle from memory.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sapt_bundle_from_bytes(data: *const u8, len: usize, out: *mut *mut SaptBundle) -> SaptStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if data.is_null() {
            return Err(null("data"));
        }
        let b = IntegralBundle::from_bytes(std::slice::from_raw_parts(data, len)).map_err(engine)?;
        *out = Box::into_raw(Box::new(SaptBundle(b)));
        Ok(())
    })
}

/// # Safety
/// `bundle` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sapt_bundle_dims(bundle: *const SaptBundle, out: *mut SaptBundleDims) -> SaptStatus {
    guard(|| {
        let b = &bundle.as_ref().ok_or_else(|| null("bundle"))?.0;
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        *o = SaptBundleDims {
            n_orb_a: b.n_orb_a,
            n_orb_b: b.n_orb_b,
            n_elec_a: b.n_elec_a,
            n_elec_b: b.n_elec_b,
            n_active_a: b.active_a.active.len(),
            n_active_b: b.active_b.active.len(),
        };
        Ok(())
    })
}

/// # Safety
/// `bundle` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn sapt_bundle_free(bundle: *mut SaptBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

/// Runs the pipeline on `bundle` with a JSON run configuration
/// (`bundle_path` and `output_path` are ignored; NULL means defaults).
///
/// # Safety
/// `bundle` must be a live handle, `config_json` NULL or a NUL-terminated
/// string, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sapt_run(bundle: *const SaptBundle, config_json: *const c_char, out: *mut *mut SaptReportHandle) -> SaptStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let b = &bundle.as_ref().ok_or_else(|| null("bundle"))?.0;
        let mut cfg = if config_json.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_json(str_arg(config_json, "config_json")?).map_err(engine)?
        };
        cfg.output_path = None;
        cfg.validate().map_err(engine)?;
        let checksum = sapt_vqe::bundle::checksum_bytes(&b.to_bytes());
        let r = run_bundle(b, &cfg, &checksum).map_err(engine)?;
        *out = Box::into_raw(Box::new(SaptReportHandle(r)));
        Ok(())
    })
}

/// One energy term in Hartree.
///
/// # Safety
/// `report` and `hartree` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sapt_report_energy(report: *const SaptReportHandle, term: SaptTerm, hartree: *mut f64) -> SaptStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.0;
        let o = hartree.as_mut().ok_or_else(|| null("hartree"))?;
        *o = match term {
            SaptTerm::Elst => r.elst,
            SaptTerm::Exch => r.exch,
            SaptTerm::IndU => r.ind_u,
            SaptTerm::ExchIndU => r.exch_ind_u,
            SaptTerm::Disp => r.disp,
            SaptTerm::ExchDisp => r.exch_disp,
            SaptTerm::Total => r.total,
        }
        .hartree;
        Ok(())
    })
}

/// The full report as JSON; release with [`sapt_string_free`]. NULL on failure.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sapt_report_json(report: *const SaptReportHandle) -> *mut c_char {
    let mut s = ptr::null_mut();
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.0;
        let json = serde_json::to_string_pretty(r).map_err(|e| (SaptStatus::Validation, e.to_string()))?;
        s = CString::new(json).map_err(|e| (SaptStatus::Validation, e.to_string()))?.into_raw();
        Ok(())
    });
    s
}

/// # Safety
/// `report` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn sapt_report_free(report: *mut SaptReportHandle) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn sapt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Circuit resource counts for `m` active orbitals and `k` layers.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sapt_resource_count(m: usize, k: usize, out: *mut SaptResources) -> SaptStatus {
    guard(|| {
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        if m == 0 {
            return Err((SaptStatus::Validation, "m must be positive".into()));
        }
        let r = resource_count(m, k);
        *o = SaptResources { n_qubits: r.n_qubits, n_params: r.n_params, n_two_qubit_gates: r.n_two_qubit_gates, depth: r.depth };
        Ok(())
    })
}
