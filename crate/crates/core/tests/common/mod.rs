#![allow(dead_code)]

use std::path::PathBuf;

use repairloop::bench::BugCase;
use repairloop::harness::TestSpec;
use repairloop::prompt::render_fenced;

pub fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

pub fn response(reasoning: &str, code: &str) -> String {
    format!("{reasoning}\n{}\n", render_fenced(code))
}

/// `a x y` prints x+y, `m x y` prints x*y. Both branches are wrong.
pub const CALC_BUGGY: &str = r#"#include <stdio.h>

int main(void) {
    char op;
    int x, y;
    if (scanf(" %c %d %d", &op, &x, &y) != 3)
        return 1;
    if (op == 'a')
        printf("%d\n", x - y);
    else
        printf("%d\n", x + y);
    return 0;
}
"#;

pub fn calc_fixed() -> String {
    CALC_BUGGY.replace("x - y", "x + y").replacen("x + y);\n    return", "x * y);\n    return", 1)
}

pub fn calc_half_fixed() -> String {
    CALC_BUGGY.replace("x - y", "x + y")
}

pub fn calc_bug() -> BugCase {
    BugCase {
        bug_id: "calc".into(),
        buggy_source: CALC_BUGGY.into(),
        tests: vec![
            TestSpec::new("add", "a 2 3\n", "5\n"),
            TestSpec::new("mul", "m 2 3\n", "6\n"),
            TestSpec::new("zero", "a 0 0\n", "0\n"),
        ],
        reference_fix: Some(calc_fixed()),
    }
}

pub fn useless(n: usize) -> String {
    response(&format!("attempt {n}: tweak nothing"), &CALC_BUGGY.replace("int x, y;", &format!("int x, y; /* {n} */")))
}

pub mod prompts {
    use std::path::PathBuf;

    use repairloop::harness::{ExecutionRecord, ExitStatus, SourceUnit};
    use repairloop::prompt::{AttemptSummary, FeedbackPacket, PromptBuilder, PromptBundle};
    use repairloop::spectrum::{Formula, LineId, RankedLine, SuspiciousnessRanking};
    use repairloop::Scenario;

    pub const SECTIONS: [&str; 6] =
        ["[CODE]", "[FAILING TESTS]", "[PASSING TESTS]", "[SUSPICIOUS LINES]", "[WARNINGS]", "[PREVIOUS ATTEMPTS]"];

    pub fn golden_dir() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
    }

    pub fn code() -> SourceUnit {
        SourceUnit::new(super::CALC_BUGGY, "calc").unwrap()
    }

    fn record(id: &str, passed: bool, out: &str, status: ExitStatus, stderr: &str) -> ExecutionRecord {
        ExecutionRecord {
            test_id: id.into(),
            passed,
            timed_out: false,
            exit_status: status,
            actual_stdout: out.as_bytes().to_vec(),
            stderr: stderr.as_bytes().to_vec(),
            duration: 0.01,
        }
    }

    fn attempt(i: u32) -> AttemptSummary {
        let patch = super::CALC_BUGGY.replace("x - y", &format!("x - y + {i}"));
        AttemptSummary::new(
            i,
            &format!("Attempt {i}: adjust the subtraction."),
            &patch,
            vec!["add".into(), "mul".into()],
        )
    }

    /// The feedback the loop would send for `scenario` at `iteration`.
    pub fn packet(scenario: Scenario, iteration: u32) -> FeedbackPacket {
        if !scenario.uses_tests() {
            return FeedbackPacket::default();
        }
        let calc = super::calc_bug();
        let ranking = scenario.uses_sbfl().then(|| SuspiciousnessRanking {
            formula: Formula::Ochiai,
            threshold: 0.5,
            entries: vec![
                RankedLine { line: LineId::new("src.c", 11).unwrap(), score: 0.8165 },
                RankedLine { line: LineId::new("src.c", 9).unwrap(), score: 0.75 },
            ],
        });
        let history =
            if scenario.iterative() && iteration >= 2 { (1..iteration).map(attempt).collect() } else { vec![] };
        FeedbackPacket {
            tests: calc.tests.clone(),
            outcomes: vec![
                record("add", false, "-1\n", ExitStatus::Exited(0), ""),
                record("mul", false, "5\n", ExitStatus::Exited(0), ""),
                record("zero", true, "0\n", ExitStatus::Exited(0), ""),
            ],
            ranking,
            warnings: vec!["compiler: src.c:3:5: warning: unused variable 'k' [-Wunused-variable]".into()],
            history,
        }
    }

    pub fn iteration_for(scenario: Scenario) -> u32 {
        if scenario.iterative() {
            6
        } else {
            1
        }
    }

    pub fn build(scenario: Scenario, iteration: u32) -> PromptBundle {
        PromptBuilder::default().build(&code(), &packet(scenario, iteration), scenario, iteration).unwrap()
    }

    pub fn render_golden(bundle: &PromptBundle) -> String {
        format!("=== SYSTEM ===\n{}\n=== USER ===\n{}\n", bundle.system_text, bundle.user_text)
    }

    pub fn check_section_order(text: &str) -> Result<Vec<&'static str>, String> {
        let found: Vec<(usize, &str)> =
            SECTIONS.iter().filter_map(|s| text.find(&format!("{s}\n")).map(|p| (p, *s))).collect();
        let mut sorted = found.clone();
        sorted.sort();
        if sorted != found {
            return Err(format!("sections out of order: {sorted:?}"));
        }
        Ok(found.into_iter().map(|(_, s)| s).collect())
    }

    pub fn expected_sections(scenario: Scenario, iteration: u32) -> Vec<&'static str> {
        let mut v = vec!["[CODE]"];
        if scenario.uses_tests() {
            v.extend(["[FAILING TESTS]", "[PASSING TESTS]"]);
            if scenario.uses_sbfl() {
                v.push("[SUSPICIOUS LINES]");
            }
            v.push("[WARNINGS]");
            if scenario.iterative() && iteration >= 2 {
                v.push("[PREVIOUS ATTEMPTS]");
            }
        }
        v
    }
}
