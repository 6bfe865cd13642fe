use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use mimo_ilc_ffi::*;

const J: &str = r#"{"ts":0.001,"ny":2,"nu":2,"entries":[
  [{"num":[0.5],"den":[1,-0.5]},{"num":[0.1],"den":[1,-0.8]}],
  [{"num":[0.05],"den":[1,-0.7]},{"num":[0.4],"den":[1,-0.6]}]]}"#;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    let mut needed = 0;
    let s = unsafe { mi_last_error(buf.as_mut_ptr(), buf.len(), &mut needed) };
    assert_eq!(s, MiStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
}

fn model() -> *mut MiModel {
    let json = CString::new(J).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mi_model_from_json(json.as_ptr(), &mut m) }, MiStatus::Ok);
    m
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| std::f64::consts::PI * k as f64 / (n - 1) as f64).collect()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(mi_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_and_frf() {
    let m = model();
    let (mut ny, mut nu, mut ts) = (0, 0, 0.0);
    assert_eq!(unsafe { mi_model_dims(m, &mut ny, &mut nu, &mut ts) }, MiStatus::Ok);
    assert_eq!((ny, nu, ts), (2, 2, 0.001));
    let w = grid(16);
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { mi_frf_evaluate(m, w.as_ptr(), w.len(), &mut f) }, MiStatus::Ok);
    assert_eq!(unsafe { mi_frf_len(f) }, 16);
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { mi_frf_get(f, 0, 0, 0, &mut re, &mut im) }, MiStatus::Ok);
    assert!((re - 1.0).abs() < 1e-12 && im.abs() < 1e-12);
    // 0.1 / (e^{iω} − 0.8) at ω = π is −0.1 / 1.8.
    assert_eq!(unsafe { mi_frf_get(f, 15, 0, 1, &mut re, &mut im) }, MiStatus::Ok);
    assert!((re + 0.1 / 1.8).abs() < 1e-12 && im.abs() < 1e-12);
    assert_eq!(unsafe { mi_frf_get(f, 16, 0, 0, &mut re, &mut im) }, MiStatus::InvalidInput);
    unsafe {
        mi_frf_free(f);
        mi_model_free(m);
    }
}

#[test]
fn error_paths() {
    let bad = CString::new("{not json").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mi_model_from_json(bad.as_ptr(), &mut m) }, MiStatus::InvalidInput);
    assert!(m.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { mi_model_from_json(ptr::null(), &mut m) }, MiStatus::NullPointer);
    assert_eq!(last_error(), "json is null");

    let m = model();
    let w = [0.0, 4.0];
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { mi_frf_evaluate(m, w.as_ptr(), 2, &mut f) }, MiStatus::InvalidInput);
    assert!(last_error().contains("upper bound pi"));
    unsafe { mi_model_free(m) };

    let mut tiny = [0 as std::ffi::c_char; 2];
    let mut needed = 0;
    assert_eq!(unsafe { mi_last_error(tiny.as_mut_ptr(), tiny.len(), &mut needed) }, MiStatus::BufferTooSmall);
    assert!(needed > 2);
    unsafe {
        mi_model_free(ptr::null_mut());
        mi_frf_free(ptr::null_mut());
        mi_design_free(ptr::null_mut());
    }
}

#[test]
fn bounds_sandwich() {
    let re = [1.0, 2.0, -0.5, 0.3];
    let im = [0.2, -1.0, 0.7, 0.1];
    let (mut rho, mut mu, mut sigma) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { mi_bounds(re.as_ptr(), im.as_ptr(), 2, &mut rho, &mut mu, &mut sigma) }, MiStatus::Ok);
    assert!(rho <= mu + 1e-12 && mu <= sigma + 1e-12, "{rho} {mu} {sigma}");
}

#[test]
fn design_round_trip() {
    let m = model();
    let w = grid(128);
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { mi_frf_evaluate(m, w.as_ptr(), w.len(), &mut f) }, MiStatus::Ok);
    let mode = CString::new("alg3").unwrap();
    let target = CString::new("convergent").unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { mi_design_new(m, f, mode.as_ptr(), target.as_ptr(), 0, -1.0, &mut d) }, MiStatus::Ok);
    assert_eq!(unsafe { mi_design_loops(d) }, 2);
    let mut fc = [0.0; 2];
    assert_eq!(unsafe { mi_design_cutoffs(d, fc.as_mut_ptr(), 2) }, MiStatus::Ok);
    assert!(fc[0] > 0.0 && fc[0] == fc[1]);
    let mut v = MiVerdict::default();
    assert_eq!(unsafe { mi_design_verdict(d, &mut v) }, MiStatus::Ok);
    assert!(v.convergent && v.target_met && v.fit_error < 1e-6);

    let mut needed = 0;
    assert_eq!(unsafe { mi_design_to_json(d, ptr::null_mut(), 0, &mut needed) }, MiStatus::BufferTooSmall);
    let mut buf = vec![0 as std::ffi::c_char; needed];
    assert_eq!(unsafe { mi_design_to_json(d, buf.as_mut_ptr(), needed, ptr::null_mut()) }, MiStatus::Ok);
    let json = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    let back = mimo_ilc::synthesis::DesignFilters::from_json(json).unwrap();
    assert_eq!(back.q.len(), 2);

    let bogus = CString::new("alg9").unwrap();
    let mut d2 = ptr::null_mut();
    assert_eq!(unsafe { mi_design_new(m, f, bogus.as_ptr(), target.as_ptr(), 0, -1.0, &mut d2) }, MiStatus::InvalidInput);
    assert!(last_error().contains("alg9"));
    unsafe {
        mi_design_free(d);
        mi_frf_free(f);
        mi_model_free(m);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/mimo_ilc.h");
    let src = std::env::temp_dir().join(format!("mimo_ilc_hdr_{}.c", std::process::id()));
    std::fs::write(&src, format!("#include \"{header}\"\nint main(void) {{ MiVerdict v; (void)v; return MI_STATUS_OK; }}\n"))
        .unwrap();
    let out = match Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).output() {
        Ok(o) => o,
        Err(_) => {
            eprintln!("no C compiler; skipping");
            return;
        }
    };
    std::fs::remove_file(&src).ok();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
