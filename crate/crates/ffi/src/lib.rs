//! C ABI over `nkl`.
//!
//! Every fallible call returns an [`NklStatus`] and writes its result through
//! an out-pointer. On failure the message is available from
//! [`nkl_last_error_message`] on the same thread. Handles are opaque and must
//! be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nkl::cli::config::{Overrides, RunConfig, RunConfigFile};
use nkl::discretization::{assemble_divergence_form, build_grid, BoundaryCondition, DiscreteOperator};
use nkl::measure_models::{DensityModel, ModelSpec};
use nkl::spectral_engine::{eigendecompose, SpectralDecomposition};
use nkl::verification_suite::run_scenario;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NklStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument, model, grid or configuration.
    InvalidArgument = 2,
    /// A numerical diagnostic fired (no convergence, quadrature, overflow).
    Numerical = 3,
    /// The output buffer length does not match.
    BufferSize = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NklBoundary {
    Neumann = 0,
    Dirichlet = 1,
}

/// Density model handle.
pub struct NklModel {
    inner: DensityModel,
}

/// Assembled operator handle.
pub struct NklOperator {
    inner: DiscreteOperator,
}

/// Eigendecomposition handle.
pub struct NklDecomposition {
    inner: SpectralDecomposition,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn fail(status: NklStatus, msg: &str) -> NklStatus {
    set_error(msg);
    status
}

fn from_core(e: nkl::Error) -> NklStatus {
    let status = match e.exit_code() {
        2 => NklStatus::InvalidArgument,
        _ => NklStatus::Numerical,
    };
    fail(status, &e.to_string())
}

/// Runs `body`, turning panics into [`NklStatus::Panic`].
fn guard<F: FnOnce() -> NklStatus>(body: F) -> NklStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => {
            if s == NklStatus::Ok {
                set_error("");
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(NklStatus::Panic, &format!("panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, NklStatus> {
    if s.is_null() {
        return Err(fail(NklStatus::NullPointer, &format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(NklStatus::InvalidArgument, &format!("{what} is not valid UTF-8")))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($p:expr, $what:literal) => {
        if $p.is_null() {
            return fail(NklStatus::NullPointer, concat!($what, " is null"));
        }
    };
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `nkl_*` call on this thread.
#[no_mangle]
pub extern "C" fn nkl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn nkl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a model from JSON such as `{"family": "cauchy", "beta": 2}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nkl_model_from_json(json: *const c_char, out: *mut *mut NklModel) -> NklStatus {
    guard(|| {
        non_null!(out, "out");
        let text = try_ffi!(read_str(json, "json"));
        let spec: ModelSpec = match serde_json::from_str(text) {
            Ok(s) => s,
            Err(e) => return fail(NklStatus::InvalidArgument, &format!("model JSON: {e}")),
        };
        let model = try_ffi!(spec.build().map_err(from_core));
        *out = Box::into_raw(Box::new(NklModel { inner: model }));
        NklStatus::Ok
    })
}

/// # Safety
/// `model` must come from [`nkl_model_from_json`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nkl_model_free(model: *mut NklModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nkl_model_rho(model: *const NklModel, x: f64, out: *mut f64) -> NklStatus {
    guard(|| {
        non_null!(model, "model");
        non_null!(out, "out");
        *out = (*model).inner.rho(x);
        NklStatus::Ok
    })
}

/// `-AV/V` at `x` for `V = rho^{-1/2}`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nkl_model_minus_av_over_v(model: *const NklModel, x: f64, out: *mut f64) -> NklStatus {
    guard(|| {
        non_null!(model, "model");
        non_null!(out, "out");
        *out = (*model).inner.minus_av_over_v(x);
        NklStatus::Ok
    })
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nkl_model_lyapunov_constant(model: *const NklModel, out: *mut f64) -> NklStatus {
    guard(|| {
        non_null!(model, "model");
        non_null!(out, "out");
        *out = (*model).inner.lyapunov_constant();
        NklStatus::Ok
    })
}

/// Divergence-form operator on `n` nodes of `[-l, l]`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nkl_operator_assemble(
    model: *const NklModel,
    l: f64,
    n: usize,
    bc: NklBoundary,
    out: *mut *mut NklOperator,
) -> NklStatus {
    guard(|| {
        non_null!(model, "model");
        non_null!(out, "out");
        let grid = try_ffi!(build_grid(l, n).map_err(from_core));
        let bc = match bc {
            NklBoundary::Neumann => BoundaryCondition::Neumann,
            NklBoundary::Dirichlet => BoundaryCondition::Dirichlet,
        };
        let op = try_ffi!(assemble_divergence_form(&(*model).inner, &grid, bc).map_err(from_core));
        *out = Box::into_raw(Box::new(NklOperator { inner: op }));
        NklStatus::Ok
    })
}

/// # Safety
/// `op` must come from [`nkl_operator_assemble`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nkl_operator_free(op: *mut NklOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Number of grid nodes, or 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nkl_operator_len(op: *const NklOperator) -> usize {
    if op.is_null() {
        0
    } else {
        (*op).inner.n()
    }
}

/// `out = A_h f`; both buffers hold `len` values, which must equal the node count.
///
/// # Safety
/// `f` must be readable and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn nkl_operator_apply(op: *const NklOperator, f: *const f64, out: *mut f64, len: usize) -> NklStatus {
    guard(|| {
        non_null!(op, "operator");
        non_null!(f, "f");
        non_null!(out, "out");
        let op = &(*op).inner;
        if len != op.n() {
            return fail(NklStatus::BufferSize, &format!("expected {} values, got {len}", op.n()));
        }
        let af = try_ffi!(op.apply(std::slice::from_raw_parts(f, len)).map_err(from_core));
        ptr::copy_nonoverlapping(af.as_ptr(), out, len);
        NklStatus::Ok
    })
}

/// # Safety
/// `op` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nkl_decompose(op: *const NklOperator, out: *mut *mut NklDecomposition) -> NklStatus {
    guard(|| {
        non_null!(op, "operator");
        non_null!(out, "out");
        let dec = try_ffi!(eigendecompose(&(*op).inner).map_err(from_core));
        *out = Box::into_raw(Box::new(NklDecomposition { inner: dec }));
        NklStatus::Ok
    })
}

/// # Safety
/// `dec` must come from [`nkl_decompose`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nkl_decomposition_free(dec: *mut NklDecomposition) {
    if !dec.is_null() {
        drop(Box::from_raw(dec));
    }
}

/// Eigenvalues in ascending order into `out[0..len]`; `len` must equal the node count.
///
/// # Safety
/// `dec` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn nkl_decomposition_eigenvalues(dec: *const NklDecomposition, out: *mut f64, len: usize) -> NklStatus {
    guard(|| {
        non_null!(dec, "decomposition");
        non_null!(out, "out");
        let ev = &(*dec).inner.eigenvalues;
        if len != ev.len() {
            return fail(NklStatus::BufferSize, &format!("expected {} values, got {len}", ev.len()));
        }
        ptr::copy_nonoverlapping(ev.as_ptr(), out, len);
        NklStatus::Ok
    })
}

/// Kernel of `exp(-t A^alpha)` with respect to the weighted measure, row-major
/// into `out[0..len]` with `len = n * n`.
///
/// # Safety
/// `dec` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn nkl_kernel(dec: *const NklDecomposition, t: f64, alpha: f64, out: *mut f64, len: usize) -> NklStatus {
    guard(|| {
        non_null!(dec, "decomposition");
        non_null!(out, "out");
        let dec = &(*dec).inner;
        let n = dec.n();
        if len != n * n {
            return fail(NklStatus::BufferSize, &format!("expected {} values, got {len}", n * n));
        }
        let k = try_ffi!(dec.kernel(t, alpha).map_err(from_core));
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (d, v) in dst.iter_mut().zip(k.values.iter()) {
            *d = *v;
        }
        NklStatus::Ok
    })
}

/// Runs one named scenario and writes its report as a JSON string to `out`.
/// `config_json` may be null for the defaults. A scenario that runs but does
/// not pass still returns `Ok`; the report's `status` field says `fail`.
///
/// # Safety
/// `name` must be a NUL-terminated string, `config_json` null or one, and
/// `out` writable. Free the result with [`nkl_string_free`].
#[no_mangle]
pub unsafe extern "C" fn nkl_run_scenario(name: *const c_char, config_json: *const c_char, out: *mut *mut c_char) -> NklStatus {
    guard(|| {
        non_null!(out, "out");
        let name = try_ffi!(read_str(name, "name"));
        let file = if config_json.is_null() {
            RunConfigFile::default()
        } else {
            try_ffi!(RunConfigFile::from_json(try_ffi!(read_str(config_json, "config_json"))).map_err(from_core))
        };
        let config = try_ffi!(RunConfig::resolve(file, &Overrides::default()).map_err(from_core));
        let report = try_ffi!(run_scenario(name, &config).map_err(from_core));
        let text = match serde_json::to_string(&report) {
            Ok(t) => t,
            Err(e) => return fail(NklStatus::Numerical, &format!("report serialization: {e}")),
        };
        match CString::new(text) {
            Ok(c) => {
                *out = c.into_raw();
                NklStatus::Ok
            }
            Err(_) => fail(NklStatus::Numerical, "report contains a NUL byte"),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nkl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
