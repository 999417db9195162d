//! Coverage spectra and suspiciousness scoring.
//!
//! A spectrum records, for every test, which source lines executed at least
//! once. Combined with pass/fail verdicts it yields four counts per line:
//!
//! ```text
//! t_f    failing tests            t_f_e  failing tests executing the line
//! t_p    passing tests            t_p_e  passing tests executing the line
//! ```
//!
//! from which the Ochiai, Jaccard and Tarantula scores are derived:
//!
//! ```text
//! ochiai    = t_f_e / sqrt(t_f * (t_f_e + t_p_e))
//! jaccard   = t_f_e / (t_f + t_p_e)
//! tarantula = (t_f_e / t_f) / (t_f_e / t_f + t_p_e / t_p)
//! ```
//!
//! Any zero denominator maps to a score of 0 so scoring stays total over
//! degenerate suites (no failing tests, unexecuted lines and so on).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of lines kept when nothing clears the threshold.
pub const DEFAULT_FALLBACK_K: usize = 5;
/// Default suspiciousness threshold for the prompt's localization section.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// A 1-based source line in a named file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineId {
    pub file: String,
    pub line: u32,
}

impl LineId {
    pub fn new(file: impl Into<String>, line: u32) -> Result<Self> {
        let file = file.into();
        if file.is_empty() {
            return Err(Error::InvalidInput("line id has an empty file name".into()));
        }
        if line == 0 {
            return Err(Error::InvalidInput(format!("{file}: line numbers are 1-based")));
        }
        Ok(Self { file, line })
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub test_id: String,
    pub passed: bool,
    pub timed_out: bool,
}

impl TestVerdict {
    pub fn new(test_id: impl Into<String>, passed: bool) -> Self {
        Self { test_id: test_id.into(), passed, timed_out: false }
    }

    pub fn timed_out(test_id: impl Into<String>) -> Self {
        Self { test_id: test_id.into(), passed: false, timed_out: true }
    }
}

/// Per-test record of executed lines.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageMatrix {
    tests: Vec<String>,
    executed: BTreeMap<String, BTreeSet<LineId>>,
}

impl CoverageMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a test row. Re-adding an existing test replaces its row.
    pub fn insert_row(&mut self, test_id: impl Into<String>, lines: impl IntoIterator<Item = LineId>) {
        let test_id = test_id.into();
        if !self.executed.contains_key(&test_id) {
            self.tests.push(test_id.clone());
        }
        self.executed.insert(test_id, lines.into_iter().collect());
    }

    pub fn tests(&self) -> &[String] {
        &self.tests
    }

    pub fn row(&self, test_id: &str) -> Option<&BTreeSet<LineId>> {
        self.executed.get(test_id)
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    /// Every line executed by at least one test, in (file, line) order.
    pub fn lines(&self) -> BTreeSet<LineId> {
        self.executed.values().flatten().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpectrumCounts {
    pub t_f: u32,
    pub t_p: u32,
    pub t_f_e: u32,
    pub t_p_e: u32,
}

impl SpectrumCounts {
    pub fn new(t_f: u32, t_p: u32, t_f_e: u32, t_p_e: u32) -> Result<Self> {
        if t_f_e > t_f || t_p_e > t_p {
            return Err(Error::InvalidInput(format!("inconsistent spectrum counts ({t_f}, {t_p}, {t_f_e}, {t_p_e})")));
        }
        Ok(Self { t_f, t_p, t_f_e, t_p_e })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formula {
    #[default]
    Ochiai,
    Jaccard,
    Tarantula,
}

impl Formula {
    pub const ALL: [Formula; 3] = [Formula::Ochiai, Formula::Jaccard, Formula::Tarantula];

    pub fn score(self, counts: SpectrumCounts) -> f64 {
        match self {
            Formula::Ochiai => ochiai(counts),
            Formula::Jaccard => jaccard(counts),
            Formula::Tarantula => tarantula(counts),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Formula::Ochiai => "ochiai",
            Formula::Jaccard => "jaccard",
            Formula::Tarantula => "tarantula",
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ochiai" => Ok(Formula::Ochiai),
            "jaccard" => Ok(Formula::Jaccard),
            "tarantula" => Ok(Formula::Tarantula),
            other => Err(Error::InvalidInput(format!("unknown formula `{other}`"))),
        }
    }
}

/// Counts failing/passing tests overall and among those executing `line`.
pub fn tally(matrix: &CoverageMatrix, verdicts: &[TestVerdict], line: &LineId) -> Result<SpectrumCounts> {
    check_verdicts(matrix, verdicts)?;
    let mut counts = SpectrumCounts { t_f: 0, t_p: 0, t_f_e: 0, t_p_e: 0 };
    for verdict in verdicts {
        let executed = matrix.row(&verdict.test_id).is_some_and(|row| row.contains(line));
        if verdict.passed {
            counts.t_p += 1;
            counts.t_p_e += u32::from(executed);
        } else {
            counts.t_f += 1;
            counts.t_f_e += u32::from(executed);
        }
    }
    Ok(counts)
}

fn check_verdicts(matrix: &CoverageMatrix, verdicts: &[TestVerdict]) -> Result<()> {
    let mut seen = HashMap::with_capacity(verdicts.len());
    for verdict in verdicts {
        if matrix.row(&verdict.test_id).is_none() {
            return Err(Error::InputMismatch(format!("verdict for `{}` has no coverage row", verdict.test_id)));
        }
        if seen.insert(verdict.test_id.as_str(), ()).is_some() {
            return Err(Error::InputMismatch(format!("duplicate verdict for `{}`", verdict.test_id)));
        }
    }
    if let Some(missing) = matrix.tests().iter().find(|t| !seen.contains_key(t.as_str())) {
        return Err(Error::InputMismatch(format!("test `{missing}` has no verdict")));
    }
    Ok(())
}

pub fn ochiai(c: SpectrumCounts) -> f64 {
    let denominator = (f64::from(c.t_f) * f64::from(c.t_f_e + c.t_p_e)).sqrt();
    if denominator == 0.0 {
        return 0.0;
    }
    clamp_unit(f64::from(c.t_f_e) / denominator)
}

pub fn jaccard(c: SpectrumCounts) -> f64 {
    let denominator = f64::from(c.t_f + c.t_p_e);
    if denominator == 0.0 {
        return 0.0;
    }
    clamp_unit(f64::from(c.t_f_e) / denominator)
}

pub fn tarantula(c: SpectrumCounts) -> f64 {
    let failed_ratio = ratio(c.t_f_e, c.t_f);
    let passed_ratio = ratio(c.t_p_e, c.t_p);
    let denominator = failed_ratio + passed_ratio;
    if denominator == 0.0 {
        return 0.0;
    }
    clamp_unit(failed_ratio / denominator)
}

fn ratio(numerator: u32, denominator: u32) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        f64::from(numerator) / f64::from(denominator)
    }
}

// Guards against 1.0000000000000002 from sqrt rounding.
fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Scores every line executed by any test.
pub fn score_lines(
    matrix: &CoverageMatrix,
    verdicts: &[TestVerdict],
    formula: Formula,
) -> Result<BTreeMap<LineId, f64>> {
    check_verdicts(matrix, verdicts)?;
    let (t_f, t_p) = verdicts.iter().fold((0u32, 0u32), |(f, p), v| if v.passed { (f, p + 1) } else { (f + 1, p) });
    let passed: HashMap<&str, bool> = verdicts.iter().map(|v| (v.test_id.as_str(), v.passed)).collect();

    let mut per_line: BTreeMap<LineId, (u32, u32)> = BTreeMap::new();
    for test in matrix.tests() {
        let ok = passed[test.as_str()];
        for line in matrix.row(test).into_iter().flatten() {
            let entry = per_line.entry(line.clone()).or_default();
            if ok {
                entry.1 += 1;
            } else {
                entry.0 += 1;
            }
        }
    }
    Ok(per_line
        .into_iter()
        .map(|(line, (t_f_e, t_p_e))| {
            let score = formula.score(SpectrumCounts { t_f, t_p, t_f_e, t_p_e });
            (line, score)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedLine {
    pub line: LineId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspiciousnessRanking {
    pub formula: Formula,
    pub threshold: f64,
    pub entries: Vec<RankedLine>,
}

impl SuspiciousnessRanking {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One `file:line<TAB>score` record per line, scores to four decimals.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&format!("{}\t{:.4}\n", entry.line, entry.score));
        }
        out
    }

    pub fn parse(formula: Formula, threshold: f64, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::Parse(format!("ranking record {}: `{raw}`", idx + 1));
            let (loc, score) = raw.split_once('\t').ok_or_else(bad)?;
            let (file, line) = loc.rsplit_once(':').ok_or_else(bad)?;
            let line = LineId::new(file, line.parse().map_err(|_| bad())?)?;
            let score = score.trim().parse().map_err(|_| bad())?;
            entries.push(RankedLine { line, score });
        }
        Ok(Self { formula, threshold, entries })
    }
}

fn ranking_order(a: &RankedLine, b: &RankedLine) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.line.cmp(&b.line))
}

/// Keeps lines scoring strictly above `threshold`, most suspicious first.
/// When no line qualifies, the `fallback_k` highest-scoring lines are kept
/// instead so the localization section is never empty.
pub fn rank_and_filter(
    scores: &BTreeMap<LineId, f64>,
    formula: Formula,
    threshold: f64,
    fallback_k: usize,
) -> SuspiciousnessRanking {
    let mut all: Vec<RankedLine> =
        scores.iter().map(|(line, &score)| RankedLine { line: line.clone(), score }).collect();
    all.sort_by(ranking_order);

    let above: Vec<RankedLine> = all.iter().filter(|e| e.score > threshold).cloned().collect();
    let entries = if above.is_empty() {
        all.truncate(fallback_k);
        all
    } else {
        above
    };
    SuspiciousnessRanking { formula, threshold, entries }
}

/// Score, rank and filter in one pass.
pub fn localize(
    matrix: &CoverageMatrix,
    verdicts: &[TestVerdict],
    formula: Formula,
    threshold: f64,
    fallback_k: usize,
) -> Result<SuspiciousnessRanking> {
    let scores = score_lines(matrix, verdicts, formula)?;
    Ok(rank_and_filter(&scores, formula, threshold, fallback_k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(t_f: u32, t_p: u32, t_f_e: u32, t_p_e: u32) -> SpectrumCounts {
        SpectrumCounts::new(t_f, t_p, t_f_e, t_p_e).unwrap()
    }

    fn l(line: u32) -> LineId {
        LineId::new("src.c", line).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn line_id_rejects_bad_input() {
        assert!(LineId::new("", 3).is_err());
        assert!(LineId::new("a.c", 0).is_err());
        assert_eq!(l(7).to_string(), "src.c:7");
    }

    #[test]
    fn tally_examples() {
        // 2 failing + 2 passing, line executed by both failing only.
        let mut m = CoverageMatrix::new();
        m.insert_row("f1", [l(1), l(2)]);
        m.insert_row("f2", [l(2)]);
        m.insert_row("p1", [l(1)]);
        m.insert_row("p2", []);
        let v = [
            TestVerdict::new("f1", false),
            TestVerdict::new("f2", false),
            TestVerdict::new("p1", true),
            TestVerdict::new("p2", true),
        ];
        assert_eq!(tally(&m, &v, &l(2)).unwrap(), counts(2, 2, 2, 0));
        assert_eq!(tally(&m, &v, &l(9)).unwrap(), counts(2, 2, 0, 0));
    }

    #[test]
    fn tally_three_failing_five_passing() {
        // Line 4 in f1, f3 and p2.
        let mut m = CoverageMatrix::new();
        let rows: [(&str, &[u32]); 8] = [
            ("f1", &[1, 4]),
            ("f2", &[1]),
            ("f3", &[4, 5]),
            ("p1", &[1]),
            ("p2", &[4]),
            ("p3", &[]),
            ("p4", &[5]),
            ("p5", &[1, 5]),
        ];
        for (t, lines) in rows {
            m.insert_row(t, lines.iter().map(|&n| l(n)));
        }
        let v: Vec<_> = rows.iter().map(|(t, _)| TestVerdict::new(*t, t.starts_with('p'))).collect();
        assert_eq!(tally(&m, &v, &l(4)).unwrap(), counts(3, 5, 2, 1));
    }

    #[test]
    fn tally_rejects_unknown_or_missing_tests() {
        let mut m = CoverageMatrix::new();
        m.insert_row("t1", [l(1)]);
        let err = tally(&m, &[TestVerdict::new("zzz", true)], &l(1)).unwrap_err();
        assert!(matches!(err, Error::InputMismatch(_)));
        assert!(matches!(tally(&m, &[], &l(1)), Err(Error::InputMismatch(_))));
    }

    #[test]
    fn formula_examples() {
        assert_eq!(ochiai(counts(2, 2, 2, 0)), 1.0);
        assert_eq!(ochiai(counts(3, 5, 0, 4)), 0.0);
        assert!(close(ochiai(counts(3, 5, 2, 1)), 2.0 / 3.0));

        assert_eq!(jaccard(counts(2, 2, 2, 0)), 1.0);
        assert!(close(jaccard(counts(3, 5, 2, 1)), 0.5));
        assert_eq!(jaccard(counts(0, 5, 0, 3)), 0.0);

        assert_eq!(tarantula(counts(2, 2, 2, 0)), 1.0);
        let t = tarantula(counts(3, 5, 2, 1));
        assert!(close(t, (2.0 / 3.0) / (2.0 / 3.0 + 0.2)));
        assert!((t - 0.7692).abs() < 1e-4);
        assert_eq!(tarantula(counts(3, 5, 0, 1)), 0.0);
    }

    #[test]
    fn tarantula_with_no_passing_tests() {
        assert_eq!(tarantula(counts(2, 0, 1, 0)), 1.0);
        assert_eq!(tarantula(counts(0, 0, 0, 0)), 0.0);
    }

    #[test]
    fn rank_filters_above_threshold() {
        let scores = BTreeMap::from([(l(3), 0.9), (l(7), 0.6), (l(1), 0.4)]);
        let r = rank_and_filter(&scores, Formula::Ochiai, 0.5, 5);
        let got: Vec<_> = r.entries.iter().map(|e| (e.line.line, e.score)).collect();
        assert_eq!(got, vec![(3, 0.9), (7, 0.6)]);
    }

    #[test]
    fn rank_falls_back_to_top_k() {
        let scores = BTreeMap::from([(l(1), 0.2), (l(2), 0.1)]);
        let r = rank_and_filter(&scores, Formula::Ochiai, 0.5, 5);
        let got: Vec<_> = r.entries.iter().map(|e| (e.line.line, e.score)).collect();
        assert_eq!(got, vec![(1, 0.2), (2, 0.1)]);

        let many: BTreeMap<_, _> = (1..=9).map(|n| (l(n), 0.0)).collect();
        assert_eq!(rank_and_filter(&many, Formula::Ochiai, 0.5, 5).entries.len(), 5);
    }

    #[test]
    fn rank_ties_break_by_location() {
        let scores = BTreeMap::from([(l(9), 0.7), (l(2), 0.7)]);
        let r = rank_and_filter(&scores, Formula::Ochiai, 0.5, 5);
        assert_eq!(r.entries[0].line, l(2));
        assert_eq!(r.entries[1].line, l(9));
    }

    #[test]
    fn threshold_is_strict() {
        let scores = BTreeMap::from([(l(1), 0.5), (l(2), 0.51)]);
        let r = rank_and_filter(&scores, Formula::Ochiai, 0.5, 5);
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].line, l(2));
    }

    #[test]
    fn serialization_format() {
        let scores = BTreeMap::from([(l(4), 2.0 / 3.0), (l(10), 1.0)]);
        let r = rank_and_filter(&scores, Formula::Ochiai, 0.5, 5);
        assert_eq!(r.serialize(), "src.c:10\t1.0000\nsrc.c:4\t0.6667\n");
        let back = SuspiciousnessRanking::parse(Formula::Ochiai, 0.5, &r.serialize()).unwrap();
        assert_eq!(back.entries[1].line, l(4));
        assert_eq!(back.entries[1].score, 0.6667);
    }

    #[test]
    fn formula_names_round_trip() {
        for f in Formula::ALL {
            assert_eq!(f.name().parse::<Formula>().unwrap(), f);
        }
        assert!("dstar".parse::<Formula>().is_err());
    }

    fn arb_counts() -> impl Strategy<Value = SpectrumCounts> {
        (0u32..50, 0u32..50).prop_flat_map(|(t_f, t_p)| {
            (Just(t_f), Just(t_p), 0..=t_f, 0..=t_p).prop_map(|(t_f, t_p, t_f_e, t_p_e)| SpectrumCounts {
                t_f,
                t_p,
                t_f_e,
                t_p_e,
            })
        })
    }

    proptest! {
        #[test]
        fn scores_lie_in_unit_interval(c in arb_counts()) {
            for f in Formula::ALL {
                let s = f.score(c);
                prop_assert!((0.0..=1.0).contains(&s), "{f} {c:?} -> {s}");
            }
        }

        #[test]
        fn unexecuted_by_failing_scores_zero(c in arb_counts()) {
            let c = SpectrumCounts { t_f_e: 0, ..c };
            for f in Formula::ALL {
                prop_assert_eq!(f.score(c), 0.0);
            }
        }

        #[test]
        fn perfect_correlation_scores_one(t_f in 1u32..50, t_p in 0u32..50) {
            let c = SpectrumCounts { t_f, t_p, t_f_e: t_f, t_p_e: 0 };
            for f in Formula::ALL {
                prop_assert!((f.score(c) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn monotone_in_failing_executions(c in arb_counts()) {
            prop_assume!(c.t_f_e < c.t_f);
            let next = SpectrumCounts { t_f_e: c.t_f_e + 1, ..c };
            for f in Formula::ALL {
                prop_assert!(f.score(next) >= f.score(c), "{f}: {c:?}");
            }
        }

        #[test]
        fn ranking_is_sorted_permutation(
            raw in proptest::collection::btree_map(1u32..40, 0.0f64..=1.0, 0..25),
            threshold in 0.0f64..=1.0,
        ) {
            let scores: BTreeMap<LineId, f64> = raw.iter().map(|(&n, &s)| (l(n), s)).collect();
            let r = rank_and_filter(&scores, Formula::Ochiai, threshold, 5);
            for pair in r.entries.windows(2) {
                prop_assert_eq!(ranking_order(&pair[0], &pair[1]), Ordering::Less);
            }
            let expected: BTreeSet<_> = scores.iter().filter(|(_, &s)| s > threshold).map(|(k, _)| k.clone()).collect();
            let got: BTreeSet<_> = r.entries.iter().map(|e| e.line.clone()).collect();
            if expected.is_empty() {
                prop_assert_eq!(got.len(), scores.len().min(5));
            } else {
                prop_assert_eq!(got, expected);
            }
        }
    }
}
