use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{SessionReport, Verdict};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CaseVerdict {
    pub bug_id: String,
    pub verdict: Verdict,
}

/// Aggregates for one (model, scenario) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub scenario: Scenario,
    pub cases: usize,
    pub complete: usize,
    pub partial: usize,
    pub none: usize,
    pub complete_pct: f64,
    pub partial_pct: f64,
    pub none_pct: f64,
    /// Seconds per case, start to verdict.
    pub mean_time_to_repair: f64,
    pub median_time_to_repair: f64,
    /// Seconds per provider call.
    pub mean_provider_latency: f64,
    pub verdicts: Vec<CaseVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Sorted by model, then scenario.
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    pub fn row(&self, model: &str, scenario: Scenario) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.model == model && r.scenario == scenario)
    }
}

/// Groups reports by (model, scenario). The result does not depend on the
/// order of `reports`: every sum runs over sorted values.
pub fn compute_metrics(reports: &[SessionReport]) -> Result<MetricsReport> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no session reports to aggregate".into()));
    }
    let mut groups: BTreeMap<(String, u8), Vec<&SessionReport>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.model.clone(), r.scenario.number())).or_default().push(r);
    }

    let rows = groups
        .into_iter()
        .map(|((model, _), group)| {
            let n = group.len();
            let count = |v: Verdict| group.iter().filter(|r| r.verdict == v).count();
            let (complete, partial, none) =
                (count(Verdict::CompleteFix), count(Verdict::PartialImprovement), count(Verdict::NoImprovement));
            let pct = |k: usize| k as f64 * 100.0 / n as f64;

            let mut times: Vec<f64> = group.iter().map(|r| r.wall_time).collect();
            times.sort_by(f64::total_cmp);
            let mut latencies: Vec<f64> =
                group.iter().flat_map(|r| r.attempts.iter().map(|a| a.exchange.latency)).collect();
            latencies.sort_by(f64::total_cmp);

            let mut verdicts: Vec<CaseVerdict> =
                group.iter().map(|r| CaseVerdict { bug_id: r.bug_id.clone(), verdict: r.verdict }).collect();
            verdicts.sort();

            MetricsRow {
                model,
                scenario: group[0].scenario,
                cases: n,
                complete,
                partial,
                none,
                complete_pct: pct(complete),
                partial_pct: pct(partial),
                none_pct: pct(none),
                mean_time_to_repair: mean(&times),
                median_time_to_repair: median(&times),
                mean_provider_latency: mean(&latencies),
                verdicts,
            }
        })
        .collect();
    Ok(MetricsReport { rows })
}

fn mean(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        0.0
    } else {
        sorted.iter().sum::<f64>() / sorted.len() as f64
    }
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "table" | "text" | "txt" => Ok(Self::Table),
            _ => Err(Error::InvalidInput(format!("unknown report format `{s}` (json, table)"))),
        }
    }
}

type Column = (&'static str, fn(&MetricsRow) -> String);

/// Plain-text tables: one row per model, one column per scenario.
pub fn render_table(metrics: &MetricsReport) -> String {
    let scenarios: BTreeSet<u8> = metrics.rows.iter().map(|r| r.scenario.number()).collect();
    let models: BTreeSet<&str> = metrics.rows.iter().map(|r| r.model.as_str()).collect();
    let sections: [Column; 5] = [
        ("Complete fix (% of cases)", |r| format!("{:.2}", r.complete_pct)),
        ("Partial improvement (% of cases)", |r| format!("{:.2}", r.partial_pct)),
        ("No improvement (% of cases)", |r| format!("{:.2}", r.none_pct)),
        ("Mean time to repair (s)", |r| format!("{:.2}", r.mean_time_to_repair)),
        ("Mean provider latency (s)", |r| format!("{:.2}", r.mean_provider_latency)),
    ];

    let model_width = models.iter().map(|m| m.len()).chain([5]).max().unwrap_or(5);
    let mut out = String::new();
    for (i, (title, cell)) in sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{title}");
        let _ = write!(out, "{:<model_width$}", "Model");
        for s in &scenarios {
            let _ = write!(out, " | {:>11}", format!("Scenario {s}"));
        }
        out.push('\n');
        for m in &models {
            let _ = write!(out, "{m:<model_width$}");
            for s in &scenarios {
                let value = metrics
                    .rows
                    .iter()
                    .find(|r| r.model == *m && r.scenario.number() == *s)
                    .map_or_else(|| "-".to_string(), cell);
                let _ = write!(out, " | {value:>11}");
            }
            out.push('\n');
        }
    }
    out
}

/// Writes `metrics.json` and/or `metrics.txt` under `out_dir`.
pub fn emit_report(metrics: &MetricsReport, out_dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for format in formats {
        let (name, body) = match format {
            ReportFormat::Json => ("metrics.json", serde_json::to_string_pretty(metrics)? + "\n"),
            ReportFormat::Table => ("metrics.txt", render_table(metrics)),
        };
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
