use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use super::{CompileResult, Diagnostic, Severity, SourceUnit, Toolchain, BINARY_FILE, SOURCE_FILE};
use crate::error::{Error, Result};

const OBJECT_FILE: &str = "src.o";

/// Writes `source` to `workdir/src.c` and builds an instrumented `a.out`.
///
/// Compilation and linking are separate steps so the coverage files are
/// named after the source (`src.gcno`, `src.gcda`) rather than the output.
/// A failed build is reported through [`CompileResult`]; only a missing or
/// unrunnable compiler is an `Err`.
pub fn compile_with_coverage(toolchain: &Toolchain, source: &SourceUnit, workdir: &Path) -> Result<CompileResult> {
    fs::create_dir_all(workdir).map_err(|e| Error::io(workdir, e))?;
    let src_path = workdir.join(SOURCE_FILE);
    fs::write(&src_path, &source.code).map_err(|e| Error::io(&src_path, e))?;

    let compile = run_cc(
        toolchain,
        workdir,
        &[
            "-fdiagnostics-plain-output",
            "-fdiagnostics-color=never",
            "-O0",
            "-fprofile-arcs",
            "-ftest-coverage",
            "-c",
            SOURCE_FILE,
            "-o",
            OBJECT_FILE,
        ],
    )?;
    let mut log = String::from_utf8_lossy(&compile.stderr).into_owned();
    let mut diagnostics = parse_diagnostics(&log);
    if !compile.status.success() {
        if !diagnostics.iter().any(|d| d.severity == Severity::Error) {
            diagnostics.push(Diagnostic {
                severity: Severity::Error,
                line: None,
                text: format!("compiler exited with {}", compile.status),
            });
        }
        return Ok(CompileResult { success: false, diagnostics, binary_path: None, log });
    }

    let link = run_cc(toolchain, workdir, &["-fprofile-arcs", OBJECT_FILE, "-o", BINARY_FILE, "-lm"])?;
    let link_log = String::from_utf8_lossy(&link.stderr);
    log.push_str(&link_log);
    diagnostics.extend(link_log.lines().filter_map(|l| {
        parse_line(l).or_else(|| {
            l.contains("undefined reference").then(|| Diagnostic {
                severity: Severity::Error,
                line: None,
                text: l.to_string(),
            })
        })
    }));
    if !link.status.success() {
        return Ok(CompileResult { success: false, diagnostics, binary_path: None, log });
    }

    Ok(CompileResult { success: true, diagnostics, binary_path: Some(workdir.join(BINARY_FILE)), log })
}

fn run_cc(toolchain: &Toolchain, workdir: &Path, args: &[&str]) -> Result<Output> {
    Command::new(&toolchain.cc)
        .args(args)
        .current_dir(workdir)
        .env("LC_ALL", "C")
        .output()
        .map_err(|e| Error::Environment(format!("cannot run compiler `{}`: {e}", toolchain.cc)))
}

/// Extracts `file:line[:col]: severity: message` records from compiler output.
pub fn parse_diagnostics(output: &str) -> Vec<Diagnostic> {
    output.lines().filter_map(parse_line).collect()
}

fn parse_line(line: &str) -> Option<Diagnostic> {
    let severity = [
        (": error: ", Severity::Error),
        (": fatal error: ", Severity::Error),
        (": warning: ", Severity::Warning),
        (": note: ", Severity::Note),
    ]
    .into_iter()
    .filter_map(|(marker, sev)| line.find(marker).map(|at| (at, sev)))
    .min_by_key(|(at, _)| *at)?;
    let location = &line[..severity.0];
    let line_no = location.split(':').nth(1).and_then(|n| n.parse().ok());
    Some(Diagnostic { severity: severity.1, line: line_no, text: line.to_string() })
}
