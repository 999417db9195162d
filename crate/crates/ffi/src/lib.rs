//! C interface to the repairloop library.
//!
//! Every fallible function returns an [`RlStatus`]; on failure
//! [`rl_last_error_message`] describes the problem. Strings returned
//! through out-parameters are owned by the caller and must be released with
//! [`rl_string_free`]. Handles are released with their matching `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Duration;

use repairloop::bench::load_tests;
use repairloop::harness::{compare_output, Harness, SourceUnit};
use repairloop::prompt::extract_patch;
use repairloop::spectrum::{
    localize, CoverageMatrix, Formula, LineId, SpectrumCounts, SuspiciousnessRanking, TestVerdict,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    NotFound = 4,
    Io = 5,
    CompileFailed = 6,
    Extraction = 7,
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlFormula {
    Ochiai = 0,
    Jaccard = 1,
    Tarantula = 2,
}

impl From<RlFormula> for Formula {
    fn from(f: RlFormula) -> Self {
        match f {
            RlFormula::Ochiai => Formula::Ochiai,
            RlFormula::Jaccard => Formula::Jaccard,
            RlFormula::Tarantula => Formula::Tarantula,
        }
    }
}

/// Accumulates per-test verdicts and executed lines.
pub struct RlSpectrum {
    matrix: CoverageMatrix,
    verdicts: Vec<TestVerdict>,
}

/// A filtered, ordered list of suspicious lines.
pub struct RlRanking {
    inner: SuspiciousnessRanking,
    files: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(RlStatus, String);

impl From<repairloop::Error> for Failure {
    fn from(e: repairloop::Error) -> Self {
        let status = match &e {
            repairloop::Error::Io { .. } => RlStatus::Io,
            repairloop::Error::Extraction(_) => RlStatus::Extraction,
            _ => RlStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RlStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RlStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(RlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(RlStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn bytes_arg<'a>(p: *const u8, len: usize, what: &str) -> Result<&'a [u8], Failure> {
    match (p.is_null(), len) {
        (_, 0) => Ok(&[]),
        (true, _) => Err(null(what)),
        (false, _) => Ok(std::slice::from_raw_parts(p, len)),
    }
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn to_c(s: &str) -> CString {
    CString::new(s.replace('\0', "\u{FFFD}")).unwrap_or_default()
}

fn check_out<T>(out: *mut T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        Err(null(what))
    } else {
        Ok(())
    }
}

/// Message for the last failed call on this thread; empty after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Suspiciousness of one line from its four spectrum counts.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_score(
    formula: RlFormula,
    t_f: u32,
    t_p: u32,
    t_f_e: u32,
    t_p_e: u32,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        let counts = SpectrumCounts::new(t_f, t_p, t_f_e, t_p_e)?;
        write_out(out, Formula::from(formula).score(counts), "out")
    })
}

/// Whitespace-tolerant output comparison.
///
/// # Safety
/// Buffers must be valid for their lengths; `out_equal` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_compare_output(
    actual: *const u8,
    actual_len: usize,
    expected: *const u8,
    expected_len: usize,
    out_equal: *mut bool,
) -> RlStatus {
    guard(|| {
        let a = bytes_arg(actual, actual_len, "actual")?;
        let e = bytes_arg(expected, expected_len, "expected")?;
        write_out(out_equal, compare_output(a, e), "out_equal")
    })
}

/// Splits a model response into program text and reasoning.
///
/// # Safety
/// `response` must be a NUL-terminated string; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_extract_patch(
    response: *const c_char,
    out_code: *mut *mut c_char,
    out_reasoning: *mut *mut c_char,
) -> RlStatus {
    guard(|| {
        let text = str_arg(response, "response")?;
        check_out(out_code, "out_code")?;
        check_out(out_reasoning, "out_reasoning")?;
        let (patch, reasoning) = extract_patch(text, "ffi")?;
        out_code.write(to_c(&patch.code).into_raw());
        out_reasoning.write(to_c(&reasoning).into_raw());
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn rl_spectrum_new() -> *mut RlSpectrum {
    Box::into_raw(Box::new(RlSpectrum { matrix: CoverageMatrix::new(), verdicts: Vec::new() }))
}

/// # Safety
/// `sp` must be null or a handle from [`rl_spectrum_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_spectrum_free(sp: *mut RlSpectrum) {
    if !sp.is_null() {
        drop(Box::from_raw(sp));
    }
}

/// Registers a test and its verdict. Ids must be unique.
///
/// # Safety
/// `sp` must be a live handle; `test_id` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rl_spectrum_add_test(sp: *mut RlSpectrum, test_id: *const c_char, passed: bool) -> RlStatus {
    guard(|| {
        let sp = sp.as_mut().ok_or_else(|| null("spectrum"))?;
        let id = str_arg(test_id, "test_id")?;
        if id.is_empty() {
            return Err(Failure(RlStatus::InvalidArgument, "test id is empty".into()));
        }
        if sp.verdicts.iter().any(|v| v.test_id == id) {
            return Err(Failure(RlStatus::InvalidArgument, format!("duplicate test id `{id}`")));
        }
        sp.matrix.insert_row(id, []);
        sp.verdicts.push(TestVerdict::new(id, passed));
        Ok(())
    })
}

/// Records that `test_id` executed `file:line`.
///
/// # Safety
/// `sp` must be a live handle; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rl_spectrum_mark_executed(
    sp: *mut RlSpectrum,
    test_id: *const c_char,
    file: *const c_char,
    line: u32,
) -> RlStatus {
    guard(|| {
        let sp = sp.as_mut().ok_or_else(|| null("spectrum"))?;
        let id = str_arg(test_id, "test_id")?;
        let line = LineId::new(str_arg(file, "file")?, line)?;
        let mut row =
            sp.matrix.row(id).cloned().ok_or_else(|| Failure(RlStatus::NotFound, format!("unknown test id `{id}`")))?;
        row.insert(line);
        sp.matrix.insert_row(id, row);
        Ok(())
    })
}

/// Scores every covered line and writes a new ranking handle to `out`.
///
/// # Safety
/// `sp` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_spectrum_rank(
    sp: *const RlSpectrum,
    formula: RlFormula,
    threshold: f64,
    fallback_k: usize,
    out: *mut *mut RlRanking,
) -> RlStatus {
    guard(|| {
        let sp = sp.as_ref().ok_or_else(|| null("spectrum"))?;
        check_out(out, "out")?;
        let ranking = localize(&sp.matrix, &sp.verdicts, formula.into(), threshold, fallback_k)?;
        out.write(new_ranking(ranking));
        Ok(())
    })
}

fn new_ranking(inner: SuspiciousnessRanking) -> *mut RlRanking {
    let files = inner.entries.iter().map(|e| to_c(&e.line.file)).collect();
    Box::into_raw(Box::new(RlRanking { inner, files }))
}

/// Compiles `source_path` with coverage, runs the tests in `tests_dir`
/// (`<n>.in` / `<n>.out` pairs) and ranks suspicious lines.
/// Returns `RL_STATUS_COMPILE_FAILED` when the program does not compile.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_localize_file(
    source_path: *const c_char,
    tests_dir: *const c_char,
    formula: RlFormula,
    threshold: f64,
    fallback_k: usize,
    timeout_secs: f64,
    out: *mut *mut RlRanking,
) -> RlStatus {
    guard(|| {
        let path = str_arg(source_path, "source_path")?;
        let code = std::fs::read_to_string(path).map_err(|e| Failure(RlStatus::Io, format!("{path}: {e}")))?;
        let source = SourceUnit::new(code, path)?;
        let tests = load_tests(Path::new(str_arg(tests_dir, "tests_dir")?))?;
        check_out(out, "out")?;
        if !timeout_secs.is_finite() || timeout_secs <= 0.0 {
            return Err(Failure(RlStatus::InvalidArgument, "timeout must be positive".into()));
        }
        let work = tempfile::tempdir().map_err(|e| Failure(RlStatus::Io, e.to_string()))?;
        let eval =
            Harness::with_timeout(Duration::from_secs_f64(timeout_secs)).evaluate(&source, &tests, work.path())?;
        if !eval.compile.success {
            return Err(Failure(RlStatus::CompileFailed, eval.compile.log));
        }
        let ranking = localize(&eval.coverage, &eval.verdicts(), formula.into(), threshold, fallback_k)?;
        out.write(new_ranking(ranking));
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a ranking handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_ranking_free(r: *mut RlRanking) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of entries; 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live ranking handle.
#[no_mangle]
pub unsafe extern "C" fn rl_ranking_len(r: *const RlRanking) -> usize {
    r.as_ref().map_or(0, |r| r.inner.entries.len())
}

/// Entry `index`. `out_file` borrows from the ranking and stays valid
/// until the ranking is freed.
///
/// # Safety
/// `r` must be a live handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_ranking_get(
    r: *const RlRanking,
    index: usize,
    out_file: *mut *const c_char,
    out_line: *mut u32,
    out_score: *mut f64,
) -> RlStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("ranking"))?;
        let entry = r.inner.entries.get(index).ok_or_else(|| {
            Failure(RlStatus::NotFound, format!("index {index} out of range ({} entries)", r.inner.entries.len()))
        })?;
        check_out(out_file, "out_file")?;
        check_out(out_line, "out_line")?;
        check_out(out_score, "out_score")?;
        out_file.write(r.files[index].as_ptr());
        out_line.write(entry.line.line);
        out_score.write(entry.score);
        Ok(())
    })
}

/// Renders the ranking as `file:line<TAB>score` lines.
///
/// # Safety
/// `r` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_ranking_serialize(r: *const RlRanking, out: *mut *mut c_char) -> RlStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("ranking"))?;
        write_out(out, to_c(&r.inner.serialize()).into_raw(), "out")
    })
}
