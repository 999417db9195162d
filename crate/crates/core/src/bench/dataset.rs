use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::TestSpec;

pub const MANIFEST: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugCase {
    pub bug_id: String,
    pub buggy_source: String,
    pub tests: Vec<TestSpec>,
    pub reference_fix: Option<String>,
}

impl BugCase {
    pub fn validate(&self) -> Result<()> {
        if self.tests.is_empty() {
            return Err(Error::InvalidInput(format!("bug `{}` has no tests", self.bug_id)));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.tests.iter().find(|t| !seen.insert(t.test_id.as_str())) {
            return Err(Error::InvalidInput(format!("bug `{}`: duplicate test id `{}`", self.bug_id, dup.test_id)));
        }
        Ok(())
    }

    pub fn test_ids(&self) -> Vec<String> {
        self.tests.iter().map(|t| t.test_id.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub cases: Vec<BugCase>,
}

impl DatasetIndex {
    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }
}

/// Reads `<dir>/<n>.in` and `<dir>/<n>.out` pairs ordered by `n`
/// (numerically when every stem is a number).
pub fn load_tests(dir: &Path) -> Result<Vec<TestSpec>> {
    let mut stems = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "in") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    if stems.iter().all(|s| s.parse::<u64>().is_ok()) {
        stems.sort_by_key(|s| s.parse::<u64>().unwrap_or(u64::MAX));
    } else {
        stems.sort();
    }

    let mut tests = Vec::with_capacity(stems.len());
    for stem in stems {
        let input = dir.join(format!("{stem}.in"));
        let output = dir.join(format!("{stem}.out"));
        let stdin = fs::read(&input).map_err(|e| Error::io(&input, e))?;
        let expected = fs::read(&output).map_err(|e| Error::io(&output, e))?;
        tests.push(TestSpec::new(stem, stdin, expected));
    }
    Ok(tests)
}

/// Loads `root/manifest.tsv`.
///
/// Each non-blank, non-`#` line is `bug_id<TAB>source<TAB>tests_dir` with
/// an optional fourth column naming a reference fix; paths are relative to
/// `root`. A malformed row, duplicate id or missing source is an error
/// naming the row. A case whose tests cannot be read is skipped with a
/// warning.
pub fn load_dataset(root: &Path) -> Result<DatasetIndex> {
    let manifest = root.join(MANIFEST);
    let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let mut cases = Vec::new();
    let mut ids = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let row = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') || (row == 1 && line.starts_with("bug_id\t")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&cols.len()) || cols.iter().any(|c| c.trim().is_empty()) {
            return Err(Error::Dataset(format!(
                "{}:{row}: expected `bug_id<TAB>source<TAB>tests_dir[<TAB>reference_fix]`, got `{line}`",
                manifest.display()
            )));
        }
        let bug_id = cols[0].trim().to_string();
        if !ids.insert(bug_id.clone()) {
            return Err(Error::Dataset(format!("{}:{row}: duplicate bug id `{bug_id}`", manifest.display())));
        }
        let source_path = root.join(cols[1].trim());
        let buggy_source = fs::read_to_string(&source_path).map_err(|e| {
            Error::Dataset(format!("{}:{row}: cannot read source {}: {e}", manifest.display(), source_path.display()))
        })?;
        let reference_fix = match cols.get(3) {
            Some(p) => {
                let path = root.join(p.trim());
                Some(fs::read_to_string(&path).map_err(|e| {
                    Error::Dataset(format!(
                        "{}:{row}: cannot read reference fix {}: {e}",
                        manifest.display(),
                        path.display()
                    ))
                })?)
            }
            None => None,
        };
        let tests = match load_tests(&root.join(cols[2].trim())) {
            Ok(t) if !t.is_empty() => t,
            Ok(_) => {
                warn!("{}:{row}: bug `{bug_id}` has no tests; skipped", manifest.display());
                continue;
            }
            Err(e) => {
                warn!("{}:{row}: bug `{bug_id}` skipped: {e}", manifest.display());
                continue;
            }
        };
        cases.push(BugCase { bug_id, buggy_source, tests, reference_fix });
    }
    Ok(DatasetIndex { root: root.to_path_buf(), cases })
}

/// Converts a Codeflaws checkout into a manifest corpus under `out`.
///
/// Codeflaws names each defect directory `<contest>-<problem>-bug-<buggy>-<accepted>`
/// and stores `<contest>-<problem>-<buggy>.c`, `<contest>-<problem>-<accepted>.c`
/// and test pairs `input-neg<k>`/`output-neg<k>`, `input-pos<k>`/`output-pos<k>`.
/// Failing (`neg`) tests are numbered first. Returns the number of cases written.
pub fn import_codeflaws(codeflaws_root: &Path, out: &Path) -> Result<usize> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(codeflaws_root)
        .map_err(|e| Error::io(codeflaws_root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let mut manifest = String::new();
    let mut written = 0;
    for dir in dirs {
        let Some(name) = dir.file_name().and_then(|n| n.to_str()).map(str::to_string) else { continue };
        let Some((prefix, buggy, accepted)) = parse_codeflaws_name(&name) else { continue };
        let buggy_src = dir.join(format!("{prefix}-{buggy}.c"));
        if !buggy_src.is_file() {
            warn!("{name}: missing {}", buggy_src.display());
            continue;
        }
        let case_dir = out.join("cases").join(&name);
        let tests_dir = case_dir.join("tests");
        fs::create_dir_all(&tests_dir).map_err(|e| Error::io(&tests_dir, e))?;
        copy(&buggy_src, &case_dir.join("buggy.c"))?;
        let accepted_src = dir.join(format!("{prefix}-{accepted}.c"));
        let has_fix = accepted_src.is_file();
        if has_fix {
            copy(&accepted_src, &case_dir.join("fixed.c"))?;
        }

        let mut n = 0;
        for kind in ["neg", "pos"] {
            for k in 1.. {
                let input = dir.join(format!("input-{kind}{k}"));
                let output = dir.join(format!("output-{kind}{k}"));
                if !input.is_file() || !output.is_file() {
                    break;
                }
                n += 1;
                copy(&input, &tests_dir.join(format!("{n}.in")))?;
                copy(&output, &tests_dir.join(format!("{n}.out")))?;
            }
        }
        if n == 0 {
            warn!("{name}: no tests found");
            continue;
        }
        let rel = format!("cases/{name}");
        manifest.push_str(&format!("{name}\t{rel}/buggy.c\t{rel}/tests"));
        if has_fix {
            manifest.push_str(&format!("\t{rel}/fixed.c"));
        }
        manifest.push('\n');
        written += 1;
    }
    let path = out.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(written)
}

fn parse_codeflaws_name(name: &str) -> Option<(String, String, String)> {
    let (prefix, ids) = name.split_once("-bug-")?;
    let (buggy, accepted) = ids.split_once('-')?;
    if prefix.is_empty() || buggy.is_empty() || accepted.is_empty() {
        return None;
    }
    Some((prefix.to_string(), buggy.to_string(), accepted.to_string()))
}

fn copy(from: &Path, to: &Path) -> Result<()> {
    fs::copy(from, to).map(|_| ()).map_err(|e| Error::io(from, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, text: &str) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }

    #[test]
    fn numeric_test_order() {
        let dir = tempfile::tempdir().unwrap();
        for n in [10, 2, 1, 3] {
            write(&dir.path().join(format!("{n}.in")), &format!("in{n}"));
            write(&dir.path().join(format!("{n}.out")), &format!("out{n}"));
        }
        let ids: Vec<_> = load_tests(dir.path()).unwrap().into_iter().map(|t| t.test_id).collect();
        assert_eq!(ids, ["1", "2", "3", "10"]);
    }

    #[test]
    fn malformed_row_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write(&dir.path().join(MANIFEST), "# comment\nonly-two\tcols\n");
        let err = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(err.contains("manifest.tsv:2"), "{err}");
    }

    #[test]
    fn missing_output_skips_case() {
        let dir = tempfile::tempdir().unwrap();
        write(&dir.path().join("a/src.c"), "int main(){}");
        write(&dir.path().join("a/tests/1.in"), "x");
        write(&dir.path().join("b/src.c"), "int main(){}");
        write(&dir.path().join("b/tests/1.in"), "x");
        write(&dir.path().join("b/tests/1.out"), "y");
        write(&dir.path().join(MANIFEST), "bug_id\tsource\ttests\na\ta/src.c\ta/tests\nb\tb/src.c\tb/tests\n");
        let index = load_dataset(dir.path()).unwrap();
        assert_eq!(index.len(), 1);
        assert_eq!(index.cases[0].bug_id, "b");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(&dir.path().join("s.c"), "int main(){}");
        write(&dir.path().join("t/1.in"), "");
        write(&dir.path().join("t/1.out"), "");
        write(&dir.path().join(MANIFEST), "x\ts.c\tt\nx\ts.c\tt\n");
        assert!(load_dataset(dir.path()).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn bug_case_validation() {
        let mut bug = BugCase { bug_id: "b".into(), buggy_source: "x".into(), tests: vec![], reference_fix: None };
        assert!(bug.validate().is_err());
        bug.tests = vec![TestSpec::new("1", "", ""), TestSpec::new("1", "", "")];
        assert!(bug.validate().is_err());
    }

    #[test]
    fn imports_codeflaws_layout() {
        let src = tempfile::tempdir().unwrap();
        let d = src.path().join("71-A-bug-100-200");
        write(&d.join("71-A-100.c"), "buggy");
        write(&d.join("71-A-200.c"), "fixed");
        write(&d.join("input-pos1"), "p1");
        write(&d.join("output-pos1"), "P1");
        write(&d.join("input-neg1"), "n1");
        write(&d.join("output-neg1"), "N1");
        write(&src.path().join("README/x"), "ignored");
        let out = tempfile::tempdir().unwrap();
        assert_eq!(import_codeflaws(src.path(), out.path()).unwrap(), 1);

        let index = load_dataset(out.path()).unwrap();
        let case = &index.cases[0];
        assert_eq!(case.bug_id, "71-A-bug-100-200");
        assert_eq!(case.buggy_source, "buggy");
        assert_eq!(case.reference_fix.as_deref(), Some("fixed"));
        assert_eq!(case.tests[0].stdin, b"n1");
        assert_eq!(case.tests[1].expected_stdout, b"P1");
    }
}
