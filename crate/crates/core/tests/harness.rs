use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use repairloop::harness::{ExitStatus, Harness, Severity, SourceUnit, TestSpec};
use repairloop::spectrum::LineId;

fn run(code: &str, tests: &[TestSpec], timeout: u64) -> repairloop::harness::Evaluation {
    let dir = tempfile::tempdir().unwrap();
    let src = SourceUnit::new(code, "t").unwrap();
    Harness::with_timeout(Duration::from_secs(timeout)).evaluate(&src, tests, dir.path()).unwrap()
}

#[test]
fn hello_world_passes() {
    let eval = run(
        "#include <stdio.h>\nint main(void) { puts(\"hello\"); return 0; }\n",
        &[TestSpec::new("1", "", "hello\n")],
        10,
    );
    assert!(eval.compile.success);
    assert!(eval.outcomes[0].passed);
    assert_eq!(eval.outcomes[0].exit_status, ExitStatus::Exited(0));
}

#[test]
fn syntax_error_reports_line() {
    let eval = run("int main(void) {\n    int x = 1\n    return x;\n}\n", &[TestSpec::new("1", "", "")], 10);
    assert!(!eval.compile.success);
    assert!(eval.compile.binary_path.is_none());
    let err = eval.compile.errors().next().expect("an error diagnostic");
    assert!(matches!(err.line, Some(2) | Some(3)), "{err:?}");
    assert_eq!(eval.outcomes[0].exit_status, ExitStatus::NotRun);
    assert!(!eval.outcomes[0].passed);
    assert!(eval.coverage.is_empty());
}

#[test]
fn implicit_declaration_is_a_warning() {
    let code = "#include <stdio.h>\nint main(void) { printf(\"%d\\n\", helper()); return 0; }\nint helper(void) { return 7; }\n";
    let eval = run(code, &[TestSpec::new("1", "", "7\n")], 10);
    assert!(eval.compile.success, "{}", eval.compile.log);
    assert!(eval.compile.warnings().any(|d| d.severity == Severity::Warning && d.line == Some(2)));
    assert!(eval.outcomes[0].passed);
}

#[test]
fn echo_and_whitespace_tolerance() {
    let code = "#include <stdio.h>\nint main(void) { char b[64]; while (fgets(b, 64, stdin)) fputs(b, stdout); printf(\"  \\n\\n\"); return 0; }\n";
    let eval = run(code, &[TestSpec::new("1", "a b\nc\n", "a b\nc\n"), TestSpec::new("2", "x\n", "y\n")], 10);
    assert!(eval.outcomes[0].passed);
    assert!(!eval.outcomes[1].passed);
    assert_eq!(eval.failing(), ["2"]);
}

#[test]
fn infinite_loop_times_out() {
    let started = Instant::now();
    let eval = run("int main(void) { for (;;) {} }\n", &[TestSpec::new("1", "", "")], 2);
    let o = &eval.outcomes[0];
    assert!(o.timed_out && !o.passed);
    assert!(started.elapsed() < Duration::from_secs(7), "{:?}", started.elapsed());
}

#[test]
fn division_by_zero_is_a_signal() {
    let code =
        "#include <stdio.h>\nint main(void) { int z; scanf(\"%d\", &z); printf(\"%d\\n\", 10 / z); return 0; }\n";
    let eval = run(code, &[TestSpec::new("1", "0", "")], 10);
    assert_eq!(eval.outcomes[0].exit_status, ExitStatus::Signaled("SIGFPE".into()));
    assert!(!eval.outcomes[0].passed);
}

#[test]
fn coverage_follows_branches() {
    let code = "#include <stdio.h>\n\
int main(void) {\n\
    int n;\n\
    if (scanf(\"%d\", &n) != 1) return 1;\n\
    if (n > 0)\n\
        puts(\"pos\");\n\
    else\n\
        puts(\"neg\");\n\
    return 0;\n\
}\n";
    let eval = run(code, &[TestSpec::new("p", "1", "pos\n"), TestSpec::new("n", "-1", "neg\n")], 10);
    assert!(eval.coverage_warnings.is_empty(), "{:?}", eval.coverage_warnings);
    let line = |l| LineId::new("src.c", l).unwrap();
    let p = eval.coverage.row("p").unwrap();
    let n = eval.coverage.row("n").unwrap();
    assert!(p.contains(&line(6)) && !p.contains(&line(8)));
    assert!(n.contains(&line(8)) && !n.contains(&line(6)));
    assert!(p.contains(&line(5)) && n.contains(&line(5)));
}

#[test]
fn straight_line_coverage() {
    let code = "#include <stdio.h>\nint main(void)\n{\n    int a = 1;\n    int b = a + 1;\n    (void)b;\n    puts(\"x\");\n    return 0;\n}\n";
    let eval = run(code, &[TestSpec::new("1", "", "x\n")], 10);
    let lines: BTreeSet<u32> = eval.coverage.row("1").unwrap().iter().map(|l| l.line).collect();
    assert!(lines.is_superset(&[4, 5, 7].into_iter().collect()), "{lines:?}");
}

#[test]
fn crash_without_flush_leaves_empty_row() {
    let code = "#include <signal.h>\nint main(void) { raise(SIGSEGV); return 0; }\n";
    let eval = run(code, &[TestSpec::new("1", "", "")], 10);
    assert_eq!(eval.outcomes[0].exit_status, ExitStatus::Signaled("SIGSEGV".into()));
    assert!(eval.coverage.row("1").is_some_and(|r| r.is_empty()));
}
