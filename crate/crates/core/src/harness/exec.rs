use std::io::{Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::Path;
use std::process::{Child, ChildStderr, ChildStdout, Command, Stdio};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

use super::{compare_output, ExecutionRecord, ExitStatus, SandboxLimits, TestSpec};
use crate::error::{Error, Result};

/// Bytes kept per output stream; the rest is drained and dropped.
const CAPTURE_LIMIT: usize = 8 << 20;

/// Runs `binary` on one test, feeding stdin and capturing both streams.
///
/// The child gets its own process group so a timeout kills anything it
/// spawned. Address space is capped by `limits.memory_bytes`.
pub fn run_test(binary: &Path, test: &TestSpec, timeout: Duration, limits: &SandboxLimits) -> Result<ExecutionRecord> {
    if timeout.is_zero() {
        return Err(Error::InvalidInput("test timeout must be positive".into()));
    }
    let mut cmd = Command::new(binary);
    cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    if let Some(dir) = binary.parent() {
        cmd.current_dir(dir);
    }
    let memory = limits.memory_bytes;
    let isolate = limits.isolate_network;
    // SAFETY: only async-signal-safe libc calls between fork and exec.
    unsafe {
        cmd.pre_exec(move || {
            libc::setpgid(0, 0);
            let lim = libc::rlimit { rlim_cur: memory as libc::rlim_t, rlim_max: memory as libc::rlim_t };
            if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            if isolate {
                // Needs CAP_SYS_ADMIN; without it the test keeps the host network.
                libc::unshare(libc::CLONE_NEWNET);
            }
            Ok(())
        });
    }

    let started = Instant::now();
    let mut child = cmd.spawn().map_err(|e| Error::Environment(format!("cannot spawn {}: {e}", binary.display())))?;

    let stdin = child.stdin.take().expect("piped stdin");
    let input = test.stdin.clone();
    let writer = thread::spawn(move || {
        let mut stdin = stdin;
        // A program that exits without reading its input closes the pipe early.
        let _ = stdin.write_all(&input);
    });
    let stdout = drain(child.stdout.take().expect("piped stdout"));
    let stderr = drain(child.stderr.take().expect("piped stderr"));

    let (status, timed_out) = match wait(&mut child, timeout)? {
        Some(status) => (status, false),
        None => {
            kill_group(&child);
            let status = child.wait().map_err(|e| Error::Environment(format!("wait failed: {e}")))?;
            (status, true)
        }
    };
    let duration = started.elapsed().as_secs_f64();
    let _ = writer.join();
    let actual_stdout = join_stream(stdout);
    let stderr = join_stream(stderr);

    let exit_status = match (status.code(), status.signal()) {
        (Some(code), _) => ExitStatus::Exited(code),
        (None, Some(sig)) => ExitStatus::Signaled(signal_name(sig)),
        (None, None) => ExitStatus::Signaled("unknown".into()),
    };
    // Exit codes are not judged: many contest programs end `main` without
    // a return value. A signal always fails the test.
    let crashed = matches!(exit_status, ExitStatus::Signaled(_));
    let passed = !timed_out && !crashed && compare_output(&actual_stdout, &test.expected_stdout);
    Ok(ExecutionRecord {
        test_id: test.test_id.clone(),
        passed,
        timed_out,
        exit_status,
        actual_stdout,
        stderr,
        duration,
    })
}

fn wait(child: &mut Child, timeout: Duration) -> Result<Option<std::process::ExitStatus>> {
    child.wait_timeout(timeout).map_err(|e| Error::Environment(format!("wait failed: {e}")))
}

fn kill_group(child: &Child) {
    let pid = child.id() as libc::pid_t;
    // SAFETY: plain kill(2) on the group we created in pre_exec.
    unsafe {
        libc::kill(-pid, libc::SIGKILL);
        libc::kill(pid, libc::SIGKILL);
    }
}

trait Stream: Read + Send + 'static {}
impl Stream for ChildStdout {}
impl Stream for ChildStderr {}

fn drain(mut stream: impl Stream) -> JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match stream.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = CAPTURE_LIMIT.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        kept
    })
}

fn join_stream(handle: JoinHandle<Vec<u8>>) -> Vec<u8> {
    handle.join().unwrap_or_default()
}

fn signal_name(sig: i32) -> String {
    let name = match sig {
        libc::SIGABRT => "SIGABRT",
        libc::SIGBUS => "SIGBUS",
        libc::SIGFPE => "SIGFPE",
        libc::SIGILL => "SIGILL",
        libc::SIGKILL => "SIGKILL",
        libc::SIGPIPE => "SIGPIPE",
        libc::SIGSEGV => "SIGSEGV",
        libc::SIGTERM => "SIGTERM",
        libc::SIGXCPU => "SIGXCPU",
        libc::SIGXFSZ => "SIGXFSZ",
        other => return format!("signal {other}"),
    };
    name.to_string()
}
