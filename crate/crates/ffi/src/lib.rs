//! C ABI over the mimo-ilc library.
//!
//! Objects are opaque handles created by `mi_*_new`/`mi_*_from_*` functions and released with
//! the matching `mi_*_free`. Every fallible call returns an `MiStatus`; on failure the message is
//! available from `mi_last_error`. Status values match the command-line exit codes.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mimo_ilc::cli::CliError;
use mimo_ilc::frf::{FrequencyGrid, FrfMatrix};
use mimo_ilc::linalg::{self, CMat};
use mimo_ilc::lti::{evaluate_frf, FrequencyResponse, TransferMatrix};
use mimo_ilc::synthesis::{self, DesignMode, DesignOptions, IlcDesign, Models, TuneTarget};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    VerdictFalse = 4,
    Infeasible = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Transfer-matrix model.
pub struct MiModel(TransferMatrix);

/// Sampled frequency response.
pub struct MiFrf(FrfMatrix);

/// ILC design: learning filter, robustness filters and convergence summary.
pub struct MiDesign(IlcDesign);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: MiStatus, msg: impl Into<String>) -> MiStatus {
    set_error(msg);
    status
}

fn from_cli(e: CliError) -> MiStatus {
    let status = match e.exit_code() {
        2 => MiStatus::InvalidInput,
        4 => MiStatus::VerdictFalse,
        5 => MiStatus::Infeasible,
        _ => MiStatus::Numerical,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> MiStatus) -> MiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(MiStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, MiStatus> {
    if p.is_null() {
        return Err(fail(MiStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(MiStatus::InvalidInput, format!("{name} is not UTF-8")))
}

/// Copies `s` with a trailing NUL into `buf`. `needed` receives the full size including the NUL.
unsafe fn write_str(s: &str, buf: *mut c_char, cap: usize, needed: *mut usize) -> MiStatus {
    if !needed.is_null() {
        *needed = s.len() + 1;
    }
    if buf.is_null() || cap < s.len() + 1 {
        return fail(MiStatus::BufferTooSmall, format!("buffer needs {} bytes", s.len() + 1));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    MiStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the calling thread's last error message into `buf`.
///
/// # Safety
/// `buf` must be valid for `cap` bytes or null; `needed` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn mi_last_error(buf: *mut c_char, cap: usize, needed: *mut usize) -> MiStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    write_str(&msg, buf, cap, needed)
}

// ---------------------------------------------------------------------------
// Models and frequency responses

/// Parses a transfer-matrix JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mi_model_from_json(json: *const c_char, out: *mut *mut MiModel) -> MiStatus {
    guard(|| {
        if out.is_null() {
            return fail(MiStatus::NullPointer, "out is null");
        }
        let s = match str_arg(json, "json") {
            Ok(s) => s,
            Err(e) => return e,
        };
        match TransferMatrix::from_json(s) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(MiModel(m)));
                MiStatus::Ok
            }
            Err(e) => fail(MiStatus::InvalidInput, e.to_string()),
        }
    })
}

/// # Safety
/// `model` must come from `mi_model_from_json` and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mi_model_free(model: *mut MiModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `ny`, `nu`, `ts` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn mi_model_dims(model: *const MiModel, ny: *mut usize, nu: *mut usize, ts: *mut f64) -> MiStatus {
    let Some(m) = model.as_ref() else {
        return fail(MiStatus::NullPointer, "model is null");
    };
    if !ny.is_null() {
        *ny = m.0.ny();
    }
    if !nu.is_null() {
        *nu = m.0.nu();
    }
    if !ts.is_null() {
        *ts = m.0.ts();
    }
    MiStatus::Ok
}

/// Samples `model` at `n` strictly increasing frequencies in rad/sample within [0, π].
///
/// # Safety
/// `omega` must hold `n` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mi_frf_evaluate(model: *const MiModel, omega: *const f64, n: usize, out: *mut *mut MiFrf) -> MiStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(MiStatus::NullPointer, "model is null");
        };
        if omega.is_null() || out.is_null() {
            return fail(MiStatus::NullPointer, "omega or out is null");
        }
        let w = std::slice::from_raw_parts(omega, n).to_vec();
        let grid = match FrequencyGrid::new(w, m.0.ts()) {
            Ok(g) => g,
            Err(e) => return fail(MiStatus::InvalidInput, e.to_string()),
        };
        match evaluate_frf(&m.0, &grid) {
            Ok(f) => {
                *out = Box::into_raw(Box::new(MiFrf(f)));
                MiStatus::Ok
            }
            Err(e) => fail(MiStatus::Numerical, e.to_string()),
        }
    })
}

/// # Safety
/// `frf` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mi_frf_len(frf: *const MiFrf) -> usize {
    frf.as_ref().map(|f| f.0.len()).unwrap_or(0)
}

/// Entry (i, j) at frequency index k.
///
/// # Safety
/// `frf` must be a live handle; `re`, `im` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mi_frf_get(frf: *const MiFrf, k: usize, i: usize, j: usize, re: *mut f64, im: *mut f64) -> MiStatus {
    let Some(f) = frf.as_ref() else {
        return fail(MiStatus::NullPointer, "frf is null");
    };
    if re.is_null() || im.is_null() {
        return fail(MiStatus::NullPointer, "re or im is null");
    }
    if k >= f.0.len() || i >= f.0.ny() || j >= f.0.nu() {
        return fail(MiStatus::InvalidInput, format!("index ({k}, {i}, {j}) out of range"));
    }
    let z = f.0.data[k][(i, j)];
    *re = z.re;
    *im = z.im;
    MiStatus::Ok
}

/// # Safety
/// `frf` must come from `mi_frf_evaluate` and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mi_frf_free(frf: *mut MiFrf) {
    if !frf.is_null() {
        drop(Box::from_raw(frf));
    }
}

// ---------------------------------------------------------------------------
// Bounds

/// Spectral radius, structured-singular-value upper bound (diagonal structure) and σ̄ of a
/// complex n×n matrix given as row-major real and imaginary parts.
///
/// # Safety
/// `re` and `im` must hold n·n values; outputs must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn mi_bounds(
    re: *const f64,
    im: *const f64,
    n: usize,
    rho: *mut f64,
    mu: *mut f64,
    sigma: *mut f64,
) -> MiStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return fail(MiStatus::NullPointer, "re or im is null");
        }
        if n == 0 {
            return fail(MiStatus::InvalidInput, "n must be positive");
        }
        let (r, i) = (std::slice::from_raw_parts(re, n * n), std::slice::from_raw_parts(im, n * n));
        let a = CMat::from_fn(n, n, |p, q| Complex64::new(r[p * n + q], i[p * n + q]));
        if !rho.is_null() {
            *rho = linalg::spectral_radius(&a);
        }
        if !mu.is_null() {
            *mu = linalg::mu_upper_diag(&a).value;
        }
        if !sigma.is_null() {
            *sigma = linalg::sigma_max(&a);
        }
        MiStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// Designs

/// Designs L and Q for `mode` ("naive", "alg1", "alg2", "alg3") against `target`
/// ("convergent", "monotone"). `j_meas` supplies the measured J used for tuning; the learning
/// filter inverts `model`. Zero `preview` or negative `regularization` select the defaults.
///
/// # Safety
/// Handles must be live; strings NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mi_design_new(
    model: *const MiModel,
    j_meas: *const MiFrf,
    mode: *const c_char,
    target: *const c_char,
    preview: usize,
    regularization: f64,
    out: *mut *mut MiDesign,
) -> MiStatus {
    guard(|| {
        let (Some(m), Some(j)) = (model.as_ref(), j_meas.as_ref()) else {
            return fail(MiStatus::NullPointer, "model or j_meas is null");
        };
        if out.is_null() {
            return fail(MiStatus::NullPointer, "out is null");
        }
        let parsed = str_arg(mode, "mode").and_then(|s| {
            s.parse::<DesignMode>().map_err(|e| fail(MiStatus::InvalidInput, e))
        });
        let mode = match parsed {
            Ok(v) => v,
            Err(e) => return e,
        };
        let parsed = str_arg(target, "target").and_then(|s| {
            s.parse::<TuneTarget>().map_err(|e| fail(MiStatus::InvalidInput, e))
        });
        let target = match parsed {
            Ok(v) => v,
            Err(e) => return e,
        };
        let defaults = DesignOptions::default();
        let opts = DesignOptions {
            preview: if preview == 0 { defaults.preview } else { preview },
            regularization: if regularization < 0.0 { defaults.regularization } else { regularization },
            target,
            ..defaults
        };
        let models = Models { full: Some(&m.0 as &dyn FrequencyResponse), loops: None };
        match synthesis::build_design(mode, &models, &j.0, &opts) {
            Ok(d) => {
                *out = Box::into_raw(Box::new(MiDesign(d)));
                MiStatus::Ok
            }
            Err(e) => from_cli(e.into()),
        }
    })
}

/// # Safety
/// `design` must come from `mi_design_new` and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mi_design_free(design: *mut MiDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// Number of loops (robustness filters) of the design.
///
/// # Safety
/// `design` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mi_design_loops(design: *const MiDesign) -> usize {
    design.as_ref().map(|d| d.0.q.len()).unwrap_or(0)
}

/// Copies the per-loop cut-offs in Hz into `out` (capacity `cap`).
///
/// # Safety
/// `design` must be live; `out` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn mi_design_cutoffs(design: *const MiDesign, out: *mut f64, cap: usize) -> MiStatus {
    let Some(d) = design.as_ref() else {
        return fail(MiStatus::NullPointer, "design is null");
    };
    let fc = d.0.cutoffs();
    if out.is_null() || cap < fc.len() {
        return fail(MiStatus::BufferTooSmall, format!("need room for {} cut-offs", fc.len()));
    }
    ptr::copy_nonoverlapping(fc.as_ptr(), out, fc.len());
    MiStatus::Ok
}

/// Convergence summary on the tuning grid.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MiVerdict {
    pub convergent: bool,
    pub monotone: bool,
    pub joint_convergent: bool,
    pub joint_monotone: bool,
    pub target_met: bool,
    pub gamma: f64,
    pub rho_max: f64,
    pub worst_omega: f64,
    pub fit_error: f64,
}

/// # Safety
/// `design` must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mi_design_verdict(design: *const MiDesign, out: *mut MiVerdict) -> MiStatus {
    let Some(d) = design.as_ref() else {
        return fail(MiStatus::NullPointer, "design is null");
    };
    if out.is_null() {
        return fail(MiStatus::NullPointer, "out is null");
    }
    let s = d.0.summary();
    *out = MiVerdict {
        convergent: s.convergent,
        monotone: s.monotone,
        joint_convergent: s.joint_convergent,
        joint_monotone: s.joint_monotone,
        target_met: d.0.target_met(),
        gamma: s.gamma,
        rho_max: s.rho_max,
        worst_omega: s.worst_omega,
        fit_error: d.0.fit_error,
    };
    MiStatus::Ok
}

/// Serializes the design to JSON (the format read by the command-line `analyze` and `simulate`).
///
/// # Safety
/// `design` must be live; `buf` valid for `cap` bytes or null; `needed` valid or null.
#[no_mangle]
pub unsafe extern "C" fn mi_design_to_json(design: *const MiDesign, buf: *mut c_char, cap: usize, needed: *mut usize) -> MiStatus {
    let Some(d) = design.as_ref() else {
        return fail(MiStatus::NullPointer, "design is null");
    };
    let meta = serde_json::json!({ "tool": "mimo-ilc-ffi", "version": env!("CARGO_PKG_VERSION") });
    write_str(&d.0.to_json(&meta), buf, cap, needed)
}
