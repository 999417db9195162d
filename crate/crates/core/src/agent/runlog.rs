use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SessionReport;
use crate::error::{Error, Result};

/// One line of a session's JSONL run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub ts: String,
    pub kind: String,
    pub data: Value,
}

/// Append-only `runs/<bug_id>/<timestamp>-s<scenario>.jsonl` writer.
pub struct RunLog {
    path: PathBuf,
    file: File,
}

impl RunLog {
    pub fn create(runs_dir: &Path, bug_id: &str, scenario: u8) -> Result<Self> {
        let dir = runs_dir.join(safe_component(bug_id));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        for n in 0u32.. {
            let suffix = if n == 0 { String::new() } else { format!("-{n}") };
            let path = dir.join(format!("{stamp}-s{scenario}{suffix}.jsonl"));
            match OpenOptions::new().append(true).create_new(true).open(&path) {
                Ok(file) => return Ok(Self { path, file }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(Error::io(path, e)),
            }
        }
        unreachable!()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, kind: &str, data: &impl Serialize) -> Result<()> {
        let record = LogRecord {
            ts: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            kind: kind.to_string(),
            data: serde_json::to_value(data)?,
        };
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))
    }
}

fn safe_component(s: &str) -> String {
    let cleaned: String =
        s.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' }).collect();
    match cleaned.as_str() {
        "" | "." | ".." => format!("_{cleaned}"),
        _ => cleaned,
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        records.push(record);
    }
    Ok(records)
}

/// The final report stored in a run log.
pub fn report_from_log(path: &Path) -> Result<SessionReport> {
    let record = read_log(path)?
        .into_iter()
        .rev()
        .find(|r| r.kind == "report")
        .ok_or_else(|| Error::Parse(format!("{}: no report record", path.display())))?;
    serde_json::from_value(record.data).map_err(|e| Error::Parse(format!("{}: bad report: {e}", path.display())))
}

/// Every `*.jsonl` file under `runs_dir`, sorted by path.
pub fn find_logs(runs_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![runs_dir.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "jsonl") {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appends_and_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = RunLog::create(dir.path(), "bug/1", 5).unwrap();
        log.append("config", &serde_json::json!({"a": 1})).unwrap();
        log.append("note", &"hello").unwrap();
        assert!(log.path().starts_with(dir.path().join("bug_1")));
        let records = read_log(log.path()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].kind, "config");
        assert_eq!(records[1].data, Value::String("hello".into()));
        assert_eq!(find_logs(dir.path()).unwrap(), vec![log.path().to_path_buf()]);
    }

    #[test]
    fn concurrent_sessions_get_distinct_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunLog::create(dir.path(), "b", 1).unwrap();
        let b = RunLog::create(dir.path(), "b", 1).unwrap();
        assert_ne!(a.path(), b.path());
    }

    #[test]
    fn corrupt_lines_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        fs::write(&path, "{\"ts\":\"t\",\"kind\":\"k\",\"data\":1}\nnot json\n").unwrap();
        let err = read_log(&path).unwrap_err().to_string();
        assert!(err.contains("x.jsonl:2"), "{err}");
        assert!(report_from_log(&path).is_err());
    }

    #[test]
    fn unsafe_ids_are_neutralized() {
        assert_eq!(safe_component(".."), "_..");
        assert_eq!(safe_component("a b"), "a_b");
    }
}
