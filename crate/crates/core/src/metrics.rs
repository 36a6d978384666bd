//! Mutation scores and oracle gaps.
//!
//! Scores are kept as exact tallies and only turned into floating point at
//! the edges. The raw oracle gap is `100 * (coverage - mutation_score)`; the
//! covered gap uses the score over mutants on covered lines only.

use std::collections::{BTreeSet, HashMap};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::coverage::{self, CoverageMap};
use crate::error::{Error, Result};
use crate::executor::{MutantOutcome, Verdict};
use crate::operators::Mutant;

pub type Exact = Ratio<i128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOptions {
    pub timeout_as_kill: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            timeout_as_kill: true,
        }
    }
}

impl ScoreOptions {
    pub fn detected(&self, verdict: Verdict) -> bool {
        match verdict {
            Verdict::Killed => true,
            Verdict::Timeout => self.timeout_as_kill,
            Verdict::Survived | Verdict::Invalid => false,
        }
    }
}

/// `killed / valid` kept exact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub killed: u64,
    pub valid: u64,
}

impl Tally {
    pub fn from_verdicts<'a>(verdicts: impl IntoIterator<Item = &'a Verdict>, opts: ScoreOptions) -> Self {
        let mut t = Tally::default();
        for &v in verdicts {
            if v != Verdict::Invalid {
                t.valid += 1;
                if opts.detected(v) {
                    t.killed += 1;
                }
            }
        }
        t
    }

    pub fn exact(&self) -> Option<Exact> {
        (self.valid > 0).then(|| Ratio::new(self.killed as i128, self.valid as i128))
    }

    pub fn score(&self) -> Option<f64> {
        (self.valid > 0).then(|| self.killed as f64 / self.valid as f64)
    }
}

pub fn exact_to_f64(r: Exact) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn mutation_score(outcomes: &[MutantOutcome], opts: ScoreOptions) -> Result<f64> {
    Tally::from_verdicts(outcomes.iter().map(|o| &o.verdict), opts)
        .score()
        .ok_or(Error::UndefinedScore)
}

/// Score over valid mutants whose line is in `covered_lines`; `None` when
/// there are no such mutants.
pub fn covered_mutation_score(
    outcomes: &[MutantOutcome],
    mutants: &[Mutant],
    covered_lines: &BTreeSet<usize>,
    opts: ScoreOptions,
) -> Option<f64> {
    let line_of: HashMap<&str, usize> = mutants.iter().map(|m| (m.id.as_str(), m.line)).collect();
    Tally::from_verdicts(
        outcomes
            .iter()
            .filter(|o| {
                line_of
                    .get(o.mutant_id.as_str())
                    .is_some_and(|l| covered_lines.contains(l))
            })
            .map(|o| &o.verdict),
        opts,
    )
    .score()
}

/// Raw oracle gap in percentage points.
pub fn oracle_gap(coverage: f64, mutation_score: f64) -> f64 {
    100.0 * (coverage - mutation_score)
}

pub fn covered_oracle_gap(coverage: f64, covered_mutation_score: Option<f64>) -> Option<f64> {
    covered_mutation_score.map(|s| oracle_gap(coverage, s))
}

fn exact_gap(coverage: Exact, score: Exact) -> Exact {
    (coverage - score) * Ratio::from_integer(100)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileGapReport {
    pub path: String,
    pub coverage: Option<f64>,
    pub mutants_total: u64,
    pub mutants_valid: u64,
    pub mutants_on_covered_lines: u64,
    pub killed: u64,
    pub killed_on_covered_lines: u64,
    pub mutation_score: Option<f64>,
    pub covered_mutation_score: Option<f64>,
    pub raw_gap: Option<f64>,
    pub covered_gap: Option<f64>,
    pub covered_lines: u64,
    pub instrumented_lines: u64,
}

impl FileGapReport {
    pub fn coverage_available(&self) -> bool {
        self.instrumented_lines > 0
    }

    pub fn coverage_exact(&self) -> Option<Exact> {
        self.coverage_available()
            .then(|| Ratio::new(self.covered_lines as i128, self.instrumented_lines as i128))
    }

    pub fn score_tally(&self) -> Tally {
        Tally {
            killed: self.killed,
            valid: self.mutants_valid,
        }
    }

    pub fn covered_tally(&self) -> Tally {
        Tally {
            killed: self.killed_on_covered_lines,
            valid: self.mutants_on_covered_lines,
        }
    }

    pub fn raw_gap_exact(&self) -> Option<Exact> {
        Some(exact_gap(self.coverage_exact()?, self.score_tally().exact()?))
    }

    pub fn covered_gap_exact(&self) -> Option<Exact> {
        Some(exact_gap(self.coverage_exact()?, self.covered_tally().exact()?))
    }

    /// Builds a report from raw tallies; every derived field follows from them.
    pub fn from_counts(
        path: impl Into<String>,
        lines: Option<(u64, u64)>,
        mutants_total: u64,
        score: Tally,
        covered: Tally,
    ) -> Self {
        let (covered_lines, instrumented_lines) = lines.filter(|&(_, i)| i > 0).unwrap_or((0, 0));
        let mut r = FileGapReport {
            path: path.into(),
            coverage: None,
            mutants_total,
            mutants_valid: score.valid,
            mutants_on_covered_lines: covered.valid,
            killed: score.killed,
            killed_on_covered_lines: covered.killed,
            mutation_score: score.score(),
            covered_mutation_score: None,
            raw_gap: None,
            covered_gap: None,
            covered_lines,
            instrumented_lines,
        };
        r.coverage = r.coverage_exact().map(exact_to_f64);
        if r.coverage_available() {
            r.covered_mutation_score = covered.score();
        }
        r.raw_gap = r.raw_gap_exact().map(exact_to_f64);
        r.covered_gap = r.covered_gap_exact().map(exact_to_f64);
        r
    }
}

/// Assembles the report for `path`. Mutants and outcomes for other paths are
/// ignored. A file without coverage data gets counts but no coverage,
/// covered score or gaps.
pub fn build_file_report(
    path: &str,
    coverage_map: &CoverageMap,
    mutants: &[Mutant],
    outcomes: &[MutantOutcome],
    opts: ScoreOptions,
) -> Result<FileGapReport> {
    let by_id: HashMap<&str, &Mutant> = mutants
        .iter()
        .filter(|m| m.path == path)
        .map(|m| (m.id.as_str(), m))
        .collect();
    let lines = coverage::line_counts(coverage_map, path).ok();
    let covered = coverage::covered_lines(coverage_map, path).unwrap_or_default();

    let mut score = Tally::default();
    let mut on_covered = Tally::default();
    let mut seen = 0u64;
    for o in outcomes {
        let Some(m) = by_id.get(o.mutant_id.as_str()) else {
            continue;
        };
        seen += 1;
        if o.verdict == Verdict::Invalid {
            continue;
        }
        let detected = opts.detected(o.verdict) as u64;
        score.valid += 1;
        score.killed += detected;
        if covered.contains(&m.line) {
            on_covered.valid += 1;
            on_covered.killed += detected;
        }
    }
    if seen != by_id.len() as u64 {
        return Err(Error::Integrity(format!(
            "{path}: {} mutants but {seen} matching outcomes",
            by_id.len()
        )));
    }
    Ok(FileGapReport::from_counts(
        path,
        lines.map(|(c, i)| (c as u64, i as u64)),
        seen,
        score,
        on_covered,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectGapSummary {
    pub files_analyzed: u64,
    pub files_without_coverage: Vec<String>,
    pub covered_lines: u64,
    pub instrumented_lines: u64,
    pub coverage: Option<f64>,
    pub mutants_total: u64,
    pub mutants_valid: u64,
    pub mutants_on_covered_lines: u64,
    pub killed: u64,
    pub killed_on_covered_lines: u64,
    pub mutation_score: Option<f64>,
    pub covered_mutation_score: Option<f64>,
    pub raw_gap: Option<f64>,
    pub covered_gap: Option<f64>,
    pub files: Vec<FileGapReport>,
}

impl ProjectGapSummary {
    pub fn empty() -> Self {
        ProjectGapSummary {
            files_analyzed: 0,
            files_without_coverage: vec![],
            covered_lines: 0,
            instrumented_lines: 0,
            coverage: None,
            mutants_total: 0,
            mutants_valid: 0,
            mutants_on_covered_lines: 0,
            killed: 0,
            killed_on_covered_lines: 0,
            mutation_score: None,
            covered_mutation_score: None,
            raw_gap: None,
            covered_gap: None,
            files: vec![],
        }
    }

    /// The project totals as a single pseudo-file report.
    pub fn as_report(&self, label: &str) -> FileGapReport {
        FileGapReport::from_counts(
            label,
            Some((self.covered_lines, self.instrumented_lines)),
            self.mutants_total,
            Tally {
                killed: self.killed,
                valid: self.mutants_valid,
            },
            Tally {
                killed: self.killed_on_covered_lines,
                valid: self.mutants_on_covered_lines,
            },
        )
    }
}

/// Project-level aggregates recomputed from the per-file raw counts of files
/// that have coverage data: line-weighted coverage and mutant-weighted scores.
pub fn summarize_project(reports: Vec<FileGapReport>) -> Result<ProjectGapSummary> {
    if reports.is_empty() {
        return Err(Error::Degenerate("no file reports to summarize".into()));
    }
    let mut files = reports;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let analyzable: Vec<&FileGapReport> = files.iter().filter(|r| r.coverage_available()).collect();
    let sum = |f: fn(&FileGapReport) -> u64| analyzable.iter().map(|r| f(r)).sum::<u64>();
    let totals = FileGapReport::from_counts(
        "<project>",
        Some((sum(|r| r.covered_lines), sum(|r| r.instrumented_lines))),
        sum(|r| r.mutants_total),
        Tally {
            killed: sum(|r| r.killed),
            valid: sum(|r| r.mutants_valid),
        },
        Tally {
            killed: sum(|r| r.killed_on_covered_lines),
            valid: sum(|r| r.mutants_on_covered_lines),
        },
    );
    Ok(ProjectGapSummary {
        files_analyzed: analyzable.len() as u64,
        files_without_coverage: files
            .iter()
            .filter(|r| !r.coverage_available())
            .map(|r| r.path.clone())
            .collect(),
        covered_lines: totals.covered_lines,
        instrumented_lines: totals.instrumented_lines,
        coverage: totals.coverage,
        mutants_total: totals.mutants_total,
        mutants_valid: totals.mutants_valid,
        mutants_on_covered_lines: totals.mutants_on_covered_lines,
        killed: totals.killed,
        killed_on_covered_lines: totals.killed_on_covered_lines,
        mutation_score: totals.mutation_score,
        covered_mutation_score: totals.covered_mutation_score,
        raw_gap: totals.raw_gap,
        covered_gap: totals.covered_gap,
        files,
    })
}
