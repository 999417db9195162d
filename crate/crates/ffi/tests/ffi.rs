use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use repairloop_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rl_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn score_rejects_inconsistent_counts() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(rl_score(RlFormula::Jaccard, 1, 0, 1, 0, &mut out), RlStatus::Ok);
        assert_eq!(out, 1.0);
        assert_eq!(rl_score(RlFormula::Tarantula, 1, 0, 3, 0, &mut out), RlStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(rl_score(RlFormula::Ochiai, 1, 0, 1, 0, ptr::null_mut()), RlStatus::NullPointer);
    }
}

#[test]
fn spectrum_round_trip() {
    unsafe {
        let sp = rl_spectrum_new();
        let t1 = CString::new("t1").unwrap();
        let t2 = CString::new("t2").unwrap();
        let file = CString::new("src.c").unwrap();
        assert_eq!(rl_spectrum_add_test(sp, t1.as_ptr(), false), RlStatus::Ok);
        assert_eq!(rl_spectrum_add_test(sp, t1.as_ptr(), true), RlStatus::InvalidArgument);
        assert_eq!(rl_spectrum_add_test(sp, t2.as_ptr(), true), RlStatus::Ok);
        assert_eq!(rl_spectrum_mark_executed(sp, t1.as_ptr(), file.as_ptr(), 4), RlStatus::Ok);
        assert_eq!(rl_spectrum_mark_executed(sp, t2.as_ptr(), file.as_ptr(), 2), RlStatus::Ok);
        assert_eq!(rl_spectrum_mark_executed(sp, t2.as_ptr(), file.as_ptr(), 0), RlStatus::InvalidArgument);

        let mut ranking = ptr::null_mut();
        assert_eq!(rl_spectrum_rank(sp, RlFormula::Ochiai, 0.5, 5, &mut ranking), RlStatus::Ok);
        assert_eq!(rl_ranking_len(ranking), 1);
        let (mut f, mut line, mut score) = (ptr::null(), 0u32, 0.0);
        assert_eq!(rl_ranking_get(ranking, 0, &mut f, &mut line, &mut score), RlStatus::Ok);
        assert_eq!((CStr::from_ptr(f).to_str().unwrap(), line, score), ("src.c", 4, 1.0));
        rl_ranking_free(ranking);
        rl_spectrum_free(sp);
        assert_eq!(rl_ranking_len(ptr::null()), 0);
        rl_spectrum_free(ptr::null_mut());
        rl_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8_is_reported() {
    let bad = [0xffu8, 0xfe, 0];
    let mut code = ptr::null_mut();
    let mut why = ptr::null_mut();
    let status = unsafe { rl_extract_patch(bad.as_ptr().cast(), &mut code, &mut why) };
    assert_eq!(status, RlStatus::InvalidUtf8);
}

#[test]
fn localize_file_missing_source() {
    let src = CString::new("/nonexistent/src.c").unwrap();
    let tests = CString::new("/nonexistent").unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { rl_localize_file(src.as_ptr(), tests.as_ptr(), RlFormula::Ochiai, 0.5, 5, 10.0, &mut out) };
    assert_eq!(status, RlStatus::Io);
    assert!(last_error().contains("/nonexistent/src.c"));
}

#[test]
fn localize_file_reports_compile_failure() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.c"), "int main(void) { return 0 }\n").unwrap();
    std::fs::write(dir.path().join("1.in"), "").unwrap();
    std::fs::write(dir.path().join("1.out"), "").unwrap();
    let src = CString::new(dir.path().join("bad.c").to_str().unwrap()).unwrap();
    let tests = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { rl_localize_file(src.as_ptr(), tests.as_ptr(), RlFormula::Ochiai, 0.5, 5, 10.0, &mut out) };
    assert_eq!(status, RlStatus::CompileFailed);
    assert!(last_error().contains("error"), "{}", last_error());
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps/
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib_dir = target_dir();
    assert!(lib_dir.join("librepairloop_ffi.so").exists(), "shared library missing in {}", lib_dir.display());
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg(format!("-I{}", manifest.join("include").display()))
        .arg(format!("-L{}", lib_dir.display()))
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-lrepairloop_ffi")
        .arg("-lm")
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C smoke program failed to compile");
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
