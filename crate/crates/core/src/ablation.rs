//! Test-suite knockout experiments.
//!
//! Assertions and whole test cases are commented out to synthesize weaker
//! suites; each suite configuration is then re-measured (coverage and
//! mutation analysis) over the same mutant set, and the covered gaps are
//! compared against the full suite and against the preceding configuration.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::coverage;
use crate::error::{Error, Result};
use crate::executor::{self, CampaignConfig, Workspace};
use crate::metrics::{self, FileGapReport, ScoreOptions};
use crate::operators::{self, split_lines, Mutant};
use crate::sampling::{choose_indices, stream};

pub const DEFAULT_ASSERT_PATTERNS: &[&str] = &[
    r"^\s*assert\b",
    r"\bassert[A-Z]\w*\s*\(",
    r"\bassert\.\w+\s*\(",
    r"\b(EXPECT|ASSERT)_[A-Z_]+\s*\(",
];

pub const DEFAULT_TEST_PATTERNS: &[&str] = &[
    r"^\s*def\s+test\w*\s*\(",
    r"^\s*@Test\b",
    r"^\s*func\s+Test\w*\s*\(",
    r"^\s*TEST(_F|_P)?\s*\(",
];

/// Grid cells in traversal order: rows by test percentage, columns by
/// assertion percentage. Cells with no tests but some assertions do not
/// exist.
pub const GRID_SHAPES: [(u8, u8); 7] = [(0, 0), (50, 0), (50, 50), (50, 100), (100, 0), (100, 50), (100, 100)];

/// Below this many assertions per test case, 50% cells get a single sample.
pub const MIN_ASSERTS_PER_TEST_FOR_SAMPLING: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    Assert,
    TestCase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnockoutSite {
    pub id: String,
    pub path: String,
    pub line: usize,
    /// Last line commented out when this site is knocked out. Equal to
    /// `line` for assertions; the end of the test body for test cases.
    pub end_line: usize,
    pub kind: SiteKind,
    pub group_id: String,
}

fn site_id(path: &str, line: usize) -> String {
    format!("{path}:{line}")
}

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start().len()
}

/// Last line (0-based) of the test case anchored at `anchor`: everything up
/// to the first later line that is back at or above the anchor's
/// indentation once a deeper body has been seen. A closing `}` at that
/// indentation is part of the test.
fn test_extent(lines: &[&str], anchor: usize, anchors: &BTreeSet<usize>) -> usize {
    let base = indent_of(lines[anchor]);
    let mut seen_body = false;
    let mut end = anchor;
    for (j, line) in lines.iter().enumerate().skip(anchor + 1) {
        if line.trim().is_empty() {
            continue;
        }
        if anchors.contains(&j) {
            break;
        }
        let indent = indent_of(line);
        if indent > base {
            seen_body = true;
            end = j;
        } else if !seen_body {
            end = j;
        } else {
            if line.trim_start().starts_with('}') {
                end = j;
            }
            break;
        }
    }
    end
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiteScan {
    pub sites: Vec<KnockoutSite>,
    pub warnings: Vec<String>,
}

/// Finds test-case anchors and assertion lines in `test_files`
/// (`(path, text)` pairs). Assertions attach to the test case whose body
/// contains them; assertions outside every test case are skipped with a
/// warning.
pub fn enumerate_knockout_sites(
    test_files: &[(String, String)],
    assert_patterns: &[Regex],
    test_patterns: &[Regex],
) -> SiteScan {
    let mut scan = SiteScan::default();
    for (path, text) in test_files {
        let lines: Vec<&str> = split_lines(text).into_iter().map(|(c, _)| c).collect();
        let prefixes = operators::language_for_path(path)
            .map(operators::comment_prefixes)
            .unwrap_or(&["//", "#"]);
        let live = |l: &str| !operators::is_comment_only(l, prefixes);
        let anchors: BTreeSet<usize> = (0..lines.len())
            .filter(|&i| live(lines[i]) && test_patterns.iter().any(|re| re.is_match(lines[i])))
            .collect();
        let extents: Vec<(usize, usize)> = anchors
            .iter()
            .map(|&a| (a, test_extent(&lines, a, &anchors)))
            .collect();
        for &(a, end) in &extents {
            scan.sites.push(KnockoutSite {
                id: site_id(path, a + 1),
                path: path.clone(),
                line: a + 1,
                end_line: end + 1,
                kind: SiteKind::TestCase,
                group_id: site_id(path, a + 1),
            });
        }
        for (i, line) in lines.iter().enumerate() {
            if anchors.contains(&i) || !live(line) || !assert_patterns.iter().any(|re| re.is_match(line)) {
                continue;
            }
            let owner = extents.iter().rev().find(|(a, _)| *a < i);
            match owner {
                Some(&(a, end)) if i <= end => scan.sites.push(KnockoutSite {
                    id: site_id(path, i + 1),
                    path: path.clone(),
                    line: i + 1,
                    end_line: i + 1,
                    kind: SiteKind::Assert,
                    group_id: site_id(path, a + 1),
                }),
                _ => scan
                    .warnings
                    .push(format!("{path}:{}: assertion outside any test case, skipped", i + 1)),
            }
        }
    }
    scan.sites.sort_by(|a, b| (&a.path, a.line).cmp(&(&b.path, b.line)));
    scan
}

/// Drops test cases whose anchor line matches one of `keep_patterns`,
/// together with their assertions, so they stay in every configuration.
pub fn pin_test_cases(scan: SiteScan, test_files: &[(String, String)], keep_patterns: &[Regex]) -> SiteScan {
    if keep_patterns.is_empty() {
        return scan;
    }
    let anchor_text = |path: &str, line: usize| -> Option<&str> {
        let (_, text) = test_files.iter().find(|(p, _)| p == path)?;
        split_lines(text).get(line - 1).map(|(c, _)| *c)
    };
    let pinned: BTreeSet<String> = scan
        .sites
        .iter()
        .filter(|s| s.kind == SiteKind::TestCase)
        .filter(|s| {
            anchor_text(&s.path, s.line)
                .map(|l| keep_patterns.iter().any(|re| re.is_match(l)))
                .unwrap_or(false)
        })
        .map(|s| s.id.clone())
        .collect();
    SiteScan {
        sites: scan
            .sites
            .into_iter()
            .filter(|s| !pinned.contains(&s.group_id))
            .collect(),
        warnings: scan.warnings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub test_pct: u8,
    pub assert_pct: u8,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}_a{}", self.test_pct, self.assert_pct)
    }
}

impl Cell {
    pub const FULL: Cell = Cell {
        test_pct: 100,
        assert_pct: 100,
    };

    pub fn all() -> Vec<Cell> {
        GRID_SHAPES
            .iter()
            .map(|&(test_pct, assert_pct)| Cell { test_pct, assert_pct })
            .collect()
    }

    /// The cell to the left, wrapping to the end of the row above.
    pub fn previous(&self) -> Option<Cell> {
        let all = Cell::all();
        let pos = all.iter().position(|c| c == self)?;
        pos.checked_sub(1).map(|p| all[p])
    }

    fn stochastic(&self) -> bool {
        self.test_pct == 50 || self.assert_pct == 50
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteConfiguration {
    pub test_pct: u8,
    pub assert_pct: u8,
    pub sample_index: usize,
    pub retained: BTreeSet<String>,
}

impl SuiteConfiguration {
    pub fn cell(&self) -> Cell {
        Cell {
            test_pct: self.test_pct,
            assert_pct: self.assert_pct,
        }
    }

    pub fn label(&self) -> String {
        format!("{}_s{}", self.cell(), self.sample_index)
    }
}

/// `pct` percent of `n`, rounded half up.
pub fn share(n: usize, pct: u8) -> usize {
    (n * pct as usize + 50) / 100
}

/// Expands the seven grid shapes into suite configurations. Cells with a
/// 50% axis get `samples` seeded variants when the suite averages at least
/// 1.5 assertions per test case, and a single variant otherwise.
pub fn generate_grid(sites: &[KnockoutSite], samples: usize, seed: u64) -> Result<Vec<SuiteConfiguration>> {
    let tests: Vec<&KnockoutSite> = sites.iter().filter(|s| s.kind == SiteKind::TestCase).collect();
    if tests.is_empty() {
        return Err(Error::Degenerate("no test-case sites to knock out".into()));
    }
    let asserts: Vec<&KnockoutSite> = sites.iter().filter(|s| s.kind == SiteKind::Assert).collect();
    let ratio = asserts.len() as f64 / tests.len() as f64;
    let variants = if ratio < MIN_ASSERTS_PER_TEST_FOR_SAMPLING {
        1
    } else {
        samples.max(1)
    };
    let mut grid = Vec::new();
    for cell in Cell::all() {
        let n = if cell.stochastic() { variants } else { 1 };
        for sample_index in 0..n {
            let mut rng = stream(seed, &format!("grid:{cell}:{sample_index}"));
            let kept_tests: Vec<&KnockoutSite> = choose_indices(&mut rng, tests.len(), share(tests.len(), cell.test_pct))
                .into_iter()
                .map(|i| tests[i])
                .collect();
            let groups: BTreeSet<&str> = kept_tests.iter().map(|t| t.id.as_str()).collect();
            let candidates: Vec<&KnockoutSite> = asserts
                .iter()
                .copied()
                .filter(|a| groups.contains(a.group_id.as_str()))
                .collect();
            let kept_asserts = choose_indices(&mut rng, candidates.len(), share(candidates.len(), cell.assert_pct));
            let mut retained: BTreeSet<String> = kept_tests.iter().map(|t| t.id.clone()).collect();
            retained.extend(kept_asserts.into_iter().map(|i| candidates[i].id.clone()));
            grid.push(SuiteConfiguration {
                test_pct: cell.test_pct,
                assert_pct: cell.assert_pct,
                sample_index,
                retained,
            });
        }
    }
    Ok(grid)
}

fn comment_out(line: &str, prefix: &str) -> String {
    let indent = indent_of(line);
    format!("{}{} {}", &line[..indent], prefix, &line[indent..])
}

/// Per-file sets of 1-based lines a configuration comments out.
pub fn knocked_out_lines(sites: &[KnockoutSite], config: &SuiteConfiguration) -> BTreeMap<String, BTreeSet<usize>> {
    let mut out: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for s in sites {
        if config.retained.contains(&s.id) {
            continue;
        }
        out.entry(s.path.clone()).or_default().extend(s.line..=s.end_line);
    }
    out
}

/// Rewrites the test files under `root` for `config`. Line counts are
/// preserved; blank lines are left as they are.
pub fn materialize_configuration(root: &Path, sites: &[KnockoutSite], config: &SuiteConfiguration) -> Result<()> {
    for (path, lines) in knocked_out_lines(sites, config) {
        let prefix = operators::language_for_path(&path)
            .and_then(|l| operators::comment_prefixes(l).first())
            .ok_or_else(|| Error::UnknownCommentPrefix(path.clone()))?;
        let file = root.join(&path);
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let mut out = String::with_capacity(text.len() + lines.len() * 3);
        for (i, (content, end)) in split_lines(&text).into_iter().enumerate() {
            if lines.contains(&(i + 1)) && !content.trim().is_empty() {
                out.push_str(&comment_out(content, prefix));
            } else {
                out.push_str(content);
            }
            out.push_str(end);
        }
        fs::write(&file, out).map_err(|e| Error::io(&file, e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationOptions {
    pub campaign: CampaignConfig,
    /// Runs the suite under coverage and writes an LCOV file.
    pub coverage_command: String,
    /// Where `coverage_command` leaves its LCOV output, relative to the
    /// workspace root.
    pub coverage_report: String,
    pub scoring: ScoreOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ConfigStatus {
    Ok { reports: Vec<FileGapReport> },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub config: SuiteConfiguration,
    #[serde(flatten)]
    pub status: ConfigStatus,
}

impl ConfigResult {
    pub fn reports(&self) -> Option<&[FileGapReport]> {
        match &self.status {
            ConfigStatus::Ok { reports } => Some(reports),
            ConfigStatus::Failed { .. } => None,
        }
    }
}

/// Measures one configuration in a fresh copy of the project.
pub fn run_configuration(
    project_root: &Path,
    target_files: &[String],
    sites: &[KnockoutSite],
    config: &SuiteConfiguration,
    mutants: &[Mutant],
    opts: &AblationOptions,
) -> Result<ConfigStatus> {
    let ws = Workspace::provision(project_root, &opts.campaign)?;
    materialize_configuration(ws.path(), sites, config)?;
    let failed = |reason: String| Ok(ConfigStatus::Failed { reason });

    let run = executor::run_shell(&opts.coverage_command, ws.path(), &[], None)?;
    if !run.success() {
        return failed(format!("coverage command failed ({}): {}", run.describe(), run.output_tail));
    }
    let cov = match coverage::read_lcov(&ws.path().join(&opts.coverage_report), Some(ws.path())) {
        Ok(c) => c,
        Err(e) => return failed(e.to_string()),
    };
    let baseline_ms = match executor::baseline_in(ws.path(), &opts.campaign) {
        Ok(ms) => ms,
        Err(e) => return failed(e.to_string()),
    };
    let timeout = opts.campaign.timeout_ms(baseline_ms);
    let outcomes = executor::evaluate_all(ws.path(), mutants, &opts.campaign, timeout, &HashMap::new(), |_| {})?;
    let reports = target_files
        .iter()
        .map(|p| metrics::build_file_report(p, &cov, mutants, &outcomes, opts.scoring))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConfigStatus::Ok { reports })
}

/// Runs every configuration in order. A configuration whose suite fails is
/// recorded as failed and the grid carries on.
pub fn run_ablation_grid(
    project_root: &Path,
    target_files: &[String],
    sites: &[KnockoutSite],
    grid: &[SuiteConfiguration],
    mutants: &[Mutant],
    opts: &AblationOptions,
    mut on_result: impl FnMut(&ConfigResult),
) -> Result<Vec<ConfigResult>> {
    let mut results = Vec::with_capacity(grid.len());
    for config in grid {
        log::info!("ablation configuration {}", config.label());
        let status = run_configuration(project_root, target_files, sites, config, mutants, opts)?;
        let result = ConfigResult {
            config: config.clone(),
            status,
        };
        on_result(&result);
        results.push(result);
    }
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Full,
    Previous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub cell: Cell,
    /// Mean covered gap over target files, one entry per sample.
    pub samples: Vec<Option<f64>>,
    /// Mean over every (sample, file) covered gap in the cell.
    pub mean_covered_gap: Option<f64>,
    pub delta_vs_full: Option<f64>,
    pub delta_vs_previous: Option<f64>,
}

fn mean_of(values: &[f64]) -> Option<f64> {
    crate::stats::mean(values)
}

/// Per-cell mean covered gaps in grid order.
pub fn cell_means(results: &[ConfigResult]) -> Vec<MatrixEntry> {
    Cell::all()
        .into_iter()
        .filter_map(|cell| {
            let runs: Vec<&ConfigResult> = results.iter().filter(|r| r.config.cell() == cell).collect();
            if runs.is_empty() {
                return None;
            }
            let mut all = Vec::new();
            let samples = runs
                .iter()
                .map(|r| {
                    let gaps: Vec<f64> = r.reports()?.iter().filter_map(|f| f.covered_gap).collect();
                    all.extend(&gaps);
                    mean_of(&gaps)
                })
                .collect();
            Some(MatrixEntry {
                cell,
                samples,
                mean_covered_gap: mean_of(&all),
                delta_vs_full: None,
                delta_vs_previous: None,
            })
        })
        .collect()
}

/// Difference between each cell's mean covered gap and its reference
/// cell's. Errors when a needed reference cell has no data.
pub fn gap_delta_matrix(results: &[ConfigResult], reference: Reference) -> Result<Vec<(Cell, f64)>> {
    let means: BTreeMap<Cell, Option<f64>> = cell_means(results)
        .into_iter()
        .map(|e| (e.cell, e.mean_covered_gap))
        .collect();
    let mut out = Vec::new();
    for cell in Cell::all() {
        let Some(Some(value)) = means.get(&cell) else {
            continue;
        };
        let reference_cell = match reference {
            Reference::Full => Some(Cell::FULL),
            Reference::Previous => cell.previous(),
        };
        let Some(reference_cell) = reference_cell else {
            continue;
        };
        match means.get(&reference_cell) {
            Some(Some(base)) => out.push((cell, value - base)),
            _ => {
                return Err(Error::Degenerate(format!(
                    "reference cell {reference_cell} has no covered gap"
                )))
            }
        }
    }
    Ok(out)
}

/// Both delta views combined into one matrix; deltas whose reference has
/// no data are left absent.
pub fn ablation_matrix(results: &[ConfigResult]) -> Vec<MatrixEntry> {
    let mut entries = cell_means(results);
    let means: BTreeMap<Cell, Option<f64>> = entries.iter().map(|e| (e.cell, e.mean_covered_gap)).collect();
    let lookup = |c: Option<Cell>| c.and_then(|c| means.get(&c).copied().flatten());
    for e in &mut entries {
        if let Some(v) = e.mean_covered_gap {
            e.delta_vs_full = lookup(Some(Cell::FULL)).map(|b| v - b);
            e.delta_vs_previous = lookup(e.cell.previous()).map(|b| v - b);
        }
    }
    entries
}

pub fn compile_patterns(patterns: &[String]) -> Result<Vec<Regex>> {
    patterns.iter().map(|p| Ok(Regex::new(p)?)).collect()
}

pub fn default_assert_patterns() -> Vec<String> {
    DEFAULT_ASSERT_PATTERNS.iter().map(|s| s.to_string()).collect()
}

pub fn default_test_patterns() -> Vec<String> {
    DEFAULT_TEST_PATTERNS.iter().map(|s| s.to_string()).collect()
}
