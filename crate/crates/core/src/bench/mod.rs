//! Benchmark corpora, batch execution and aggregate metrics.

mod dataset;
mod metrics;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::warn;

pub use dataset::{import_codeflaws, load_dataset, load_tests, BugCase, DatasetIndex, MANIFEST};
pub use metrics::{compute_metrics, emit_report, render_table, MetricsReport, MetricsRow, ReportFormat};

use crate::agent::{run_session, SessionConfig, SessionReport, Termination, Verdict};
use crate::provider::Provider;

/// Runs every case in `index` with at most `parallelism` concurrent
/// sessions. Reports come back in index order. A session that fails
/// outright (e.g. the compiler is missing) becomes a `NoImprovement`
/// report carrying the error.
pub fn run_benchmark(
    index: &DatasetIndex,
    cfg: &SessionConfig,
    provider: &dyn Provider,
    parallelism: usize,
) -> Vec<SessionReport> {
    let n = index.cases.len();
    let workers = parallelism.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<SessionReport>>> = Mutex::new(vec![None; n]);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(bug) = index.cases.get(i) else { break };
                let report = run_session(bug, cfg, provider).unwrap_or_else(|e| {
                    warn!("{}: session failed: {e}", bug.bug_id);
                    failed_report(bug, cfg, provider.label(), e.to_string())
                });
                slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(report);
            });
        }
    });

    slots.into_inner().unwrap_or_else(|p| p.into_inner()).into_iter().flatten().collect()
}

fn failed_report(bug: &BugCase, cfg: &SessionConfig, model: &str, error: String) -> SessionReport {
    SessionReport {
        bug_id: bug.bug_id.clone(),
        scenario: cfg.scenario,
        model: model.to_string(),
        verdict: Verdict::NoImprovement,
        termination: Termination::Aborted,
        iterations_used: 0,
        best_iteration: None,
        initial_failing: BTreeSet::new(),
        final_failing: BTreeSet::new(),
        regressions: BTreeSet::new(),
        wall_time: 0.0,
        provider_latency: 0.0,
        error: Some(error),
        attempts: Vec::new(),
        timings: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::ScriptedProvider;
    use std::path::PathBuf;

    #[test]
    fn empty_index_yields_no_reports() {
        let index = DatasetIndex { root: PathBuf::from("."), cases: vec![] };
        let provider = ScriptedProvider::new(vec!["x".into()]).unwrap();
        assert!(run_benchmark(&index, &SessionConfig::default(), &provider, 4).is_empty());
    }

    #[test]
    fn invalid_case_becomes_no_improvement() {
        let bug =
            BugCase { bug_id: "b".into(), buggy_source: "int main(){}".into(), tests: vec![], reference_fix: None };
        let index = DatasetIndex { root: PathBuf::from("."), cases: vec![bug] };
        let provider = ScriptedProvider::new(vec!["x".into()]).unwrap();
        let reports = run_benchmark(&index, &SessionConfig::default(), &provider, 2);
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].verdict, Verdict::NoImprovement);
        assert!(reports[0].error.is_some());
    }
}
