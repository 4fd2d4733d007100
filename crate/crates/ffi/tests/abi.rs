use std::ffi::{c_char, CStr, CString};
use std::ptr;

use oblique_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    assert_eq!(unsafe { obl_last_error(buf.as_mut_ptr(), buf.len()) }, OblStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn domain(json: &str) -> (OblStatus, *mut OblDomain) {
    let text = CString::new(json).unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { obl_domain_from_json(text.as_ptr(), &mut handle) };
    (status, handle)
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(obl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn flat_domain_regdist() {
    let (status, d) = domain(r#"{"type": "flat", "delta": 0.5, "eps0": 0.1, "R0": 1}"#);
    assert_eq!(status, OblStatus::Ok);
    assert_eq!(unsafe { obl_domain_dim(d) }, 2);
    let y = [0.1, -0.3];
    let (mut rho, mut grad) = (0.0, [0.0; 2]);
    assert_eq!(unsafe { obl_regdist(d, y.as_ptr(), 2, &mut rho, grad.as_mut_ptr()) }, OblStatus::Ok);
    assert!((rho - 0.3).abs() < 1e-12);
    assert!((grad[0]).abs() < 1e-12 && (grad[1] + 1.0).abs() < 1e-12);
    assert_eq!(unsafe { obl_regdist(d, y.as_ptr(), 3, &mut rho, ptr::null_mut()) }, OblStatus::InvalidArgument);
    unsafe { obl_domain_free(d) };
}

#[test]
fn bad_inputs_map_to_codes() {
    let (status, d) = domain(r#"{"type": "spiral", "delta": 0.5, "eps0": 0.1, "R0": 1}"#);
    assert_eq!(status, OblStatus::ConfigError);
    assert!(d.is_null());
    assert!(last_error().contains("spiral"));
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { obl_domain_from_json(ptr::null(), &mut handle) }, OblStatus::NullPointer);
    let mut rho = 0.0;
    assert_eq!(unsafe { obl_regdist(ptr::null(), [0.0, -1.0].as_ptr(), 2, &mut rho, ptr::null_mut()) }, OblStatus::NullPointer);
    let mut tiny = [0 as c_char; 2];
    assert_eq!(unsafe { obl_last_error(tiny.as_mut_ptr(), tiny.len()) }, OblStatus::BufferTooSmall);
    unsafe { obl_domain_free(ptr::null_mut()) };
}

#[test]
fn cusp_window_and_wedge() {
    let (mut lo, mut hi, mut ok) = (0.0, 0.0, 0);
    assert_eq!(unsafe { obl_cusp_window(8.0, 1.0, &mut lo, &mut hi, &mut ok) }, OblStatus::Ok);
    assert_eq!(ok, 1);
    assert!((lo - 0.375).abs() < 1e-12 && (hi - 0.625).abs() < 1e-12);
    let (mut div, mut slope, mut pass) = (0, 0.0, 0);
    assert_eq!(unsafe { obl_certify_wedge(0.75 * std::f64::consts::PI, 8.0, &mut div, &mut slope, &mut pass) }, OblStatus::Ok);
    assert_eq!((div, pass), (1, 1));
    assert!((slope + 2.0 / 3.0).abs() < 0.1);
    assert_eq!(unsafe { obl_certify_wedge(1.0, 8.0, &mut div, &mut slope, &mut pass) }, OblStatus::InvalidArgument);
}

#[test]
fn experiment_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut code = -1;
    let good = CString::new(r#"{"kind": "counterexample", "example": "wedge", "theta0": 2.356, "p": [4, 8]}"#).unwrap();
    assert_eq!(unsafe { obl_run_experiment(good.as_ptr(), out.as_ptr(), 1, &mut code) }, OblStatus::Ok);
    assert_eq!(code, 0);
    assert!(dir.path().join("index.json").exists());
    let bad = CString::new(r#"{"kind": "counterexample", "example": "wedge", "theta0": 2.356, "bogus": 1}"#).unwrap();
    assert_eq!(unsafe { obl_run_experiment(bad.as_ptr(), out.as_ptr(), 1, &mut code) }, OblStatus::ConfigError);
    assert_eq!(code, 2);
}

#[test]
fn header_declares_the_abi() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/oblique.h")).unwrap();
    for name in ["obl_domain_from_json", "obl_domain_free", "obl_regdist", "obl_run_experiment", "obl_last_error", "typedef struct OblDomain OblDomain"] {
        assert!(header.contains(name), "{name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(&src, "#include \"oblique.h\"\nint main(void) { OblDomain *d = 0; (void)d; return OBL_STATUS_OK; }\n").unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}
