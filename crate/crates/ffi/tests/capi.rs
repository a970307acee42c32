use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use cutproject_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(cp_last_error_message()).to_string_lossy().into_owned() }
}

#[test]
fn generate_fibonacci_patch() {
    unsafe {
        let s = cp_scheme_fibonacci();
        assert_eq!(cp_scheme_dim(s), 1);
        assert_eq!(cp_scheme_rank(s), 2);
        let mut dens = 0.0;
        assert_eq!(cp_scheme_density(s, &mut dens), CpStatus::Ok);
        assert!((dens - 1.0 / 5f64.sqrt()).abs() < 1e-12);

        let mut w = ptr::null_mut();
        assert_eq!(cp_window_parse(c("(-1, tau-1]").as_ptr(), &mut w), CpStatus::Ok);
        let mut p = ptr::null_mut();
        assert_eq!(cp_generate(s, w, c("[0, 10]").as_ptr(), &mut p), CpStatus::Ok);
        assert_eq!(cp_patch_len(p), 8);
        assert_eq!(cp_patch_dim(p), 1);

        let mut small = [0.0; 3];
        assert_eq!(cp_patch_points(p, small.as_mut_ptr(), small.len()), CpStatus::BufferTooSmall);
        let mut buf = vec![0.0; 8];
        assert_eq!(cp_patch_points(p, buf.as_mut_ptr(), buf.len()), CpStatus::Ok);
        assert_eq!(buf[0], 0.0);
        assert!((buf[1] - 1.618033988749895).abs() < 1e-12);

        let mut json = ptr::null_mut();
        assert_eq!(cp_patch_to_json(p, &mut json), CpStatus::Ok);
        assert!(CStr::from_ptr(json).to_str().unwrap().contains("\"box\""));
        cp_string_free(json);

        cp_patch_free(p);
        cp_window_free(w);
        cp_scheme_free(s);
    }
}

#[test]
fn scheme_json_round_trip() {
    unsafe {
        let s = cp_scheme_fibonacci();
        let mut json = ptr::null_mut();
        assert_eq!(cp_scheme_to_json(s, &mut json), CpStatus::Ok);
        let mut t = ptr::null_mut();
        assert_eq!(cp_scheme_from_json(json, &mut t), CpStatus::Ok);
        assert_eq!(cp_scheme_rank(t), 2);
        cp_string_free(json);
        cp_scheme_free(t);
        cp_scheme_free(s);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(cp_scheme_from_json(c("{oops").as_ptr(), &mut s), CpStatus::Parse);
        assert!(last_error().starts_with("json"));
        assert_eq!(cp_scheme_from_json(ptr::null(), &mut s), CpStatus::NullPointer);
        assert_eq!(cp_scheme_dim(ptr::null()), 0);

        let f = cp_scheme_fibonacci();
        let mut w = ptr::null_mut();
        assert_eq!(cp_window_parse(c("[0, 1)").as_ptr(), &mut w), CpStatus::Ok);
        let mut p = ptr::null_mut();
        assert_eq!(cp_generate(f, w, c("oops").as_ptr(), &mut p), CpStatus::Parse);
        assert!(p.is_null());
        cp_window_free(w);
        cp_scheme_free(f);
        // freeing NULL is a no-op
        cp_scheme_free(ptr::null_mut());
        cp_string_free(ptr::null_mut());
    }
}

#[test]
fn translate_writes_certificate() {
    unsafe {
        let f = cp_scheme_fibonacci();
        let mut t = ptr::null_mut();
        let mut cert = ptr::null_mut();
        assert_eq!(cp_translate(f, c("sqrt(2)").as_ptr(), 1000, &mut t, &mut cert), CpStatus::Ok);
        assert_eq!(cp_scheme_rank(t), 3);
        let text = CStr::from_ptr(cert).to_str().unwrap();
        assert!(text.contains("\"kind\":\"translation\""), "{text}");
        cp_string_free(cert);
        cp_scheme_free(t);

        let mut q = ptr::null_mut();
        assert_eq!(cp_translate(f, c("tau/3").as_ptr(), 1000, &mut q, ptr::null_mut()), CpStatus::Ok);
        assert_eq!(cp_scheme_rank(q), 2);
        cp_scheme_free(q);
        cp_scheme_free(f);
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = format!("{dir}/include/cutproject.h");
    let src = format!("#include \"{header}\"\nint main(void) {{ CpScheme *s = cp_scheme_fibonacci(); cp_scheme_free(s); return CP_STATUS_OK; }}\n");
    let file = std::env::temp_dir().join("cutproject_header_check.c");
    std::fs::write(&file, src).unwrap();
    let Ok(out) = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&file).output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
