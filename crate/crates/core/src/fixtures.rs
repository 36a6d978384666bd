//! Bundled miniature projects and their expected tables.
//!
//! A fixture directory holds a small Python library, a test script, an
//! `oracle-gap.toml`, a precomputed `lcov.info` and an `expected/` folder:
//!
//! - `mutants.jsonl`: the sampled mutant list,
//! - `outcomes.jsonl`: verdicts from independent per-mutant sequential runs,
//! - `gap.json`: the gap report recomputed from those verdicts.
//!
//! The expected verdicts and gap tables are produced by `fixtures/oracle.py`,
//! which shares no code with the campaign engine.

use std::path::{Path, PathBuf};

use crate::cli;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::executor::{self, MutantOutcome};
use crate::io;
use crate::metrics::FileGapReport;
use crate::operators::Mutant;
use crate::report::GapDocument;

pub const CONFIG_FILE: &str = "oracle-gap.toml";
pub const EXPECTED_DIR: &str = "expected";

/// Directory holding the bundled fixtures.
pub fn fixtures_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Bundled fixture directories, sorted by name.
pub fn bundled() -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(fixtures_root())
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.join(CONFIG_FILE).is_file())
                .collect()
        })
        .unwrap_or_default();
    out.sort();
    out
}

#[derive(Debug, Clone)]
pub struct FixtureProject {
    pub root: PathBuf,
    pub config: RunConfig,
    pub expected_mutants: Vec<Mutant>,
    pub expected_outcomes: Vec<MutantOutcome>,
    pub expected_gap: GapDocument,
}

impl FixtureProject {
    pub fn load(dir: &Path) -> Result<Self> {
        let config = RunConfig::load(&dir.join(CONFIG_FILE))?;
        let expected = dir.join(EXPECTED_DIR);
        let (_, expected_outcomes) = executor::read_outcomes(&expected.join(cli::OUTCOMES_FILE))?;
        Ok(FixtureProject {
            root: dir.to_path_buf(),
            config,
            expected_mutants: io::read_jsonl(&expected.join(cli::MUTANTS_FILE))?,
            expected_outcomes,
            expected_gap: io::read_json(&expected.join(cli::GAP_JSON))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verification {
    Pass { mutants: usize },
    Fail { first_difference: String },
}

impl Verification {
    pub fn passed(&self) -> bool {
        matches!(self, Verification::Pass { .. })
    }
}

/// Everything the pipeline produced for a fixture.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub mutants: Vec<Mutant>,
    pub outcomes: Vec<MutantOutcome>,
    pub gap: GapDocument,
}

/// Samples, evaluates and reports on the project described by `cfg`
/// without writing anything to its output directory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineRun> {
    let (manifest, mutants) = cli::plan_mutants(cfg)?;
    let campaign = cfg.campaign()?;
    let result = executor::run_campaign(&cfg.project_root(), &mutants, &campaign)?;
    let cov = cli::load_coverage(cfg)?;
    let mut files: Vec<String> = manifest.selected_files.into_values().flatten().collect();
    files.sort();
    let gap = cli::gap_document(cfg, &files, &cov, &mutants, &result.outcomes)?;
    Ok(PipelineRun {
        mutants,
        outcomes: result.outcomes,
        gap,
    })
}

pub fn verify_fixture(dir: &Path) -> Result<Verification> {
    verify_fixture_with(dir, RunConfig::default())
}

/// Like [`verify_fixture`], with `overrides` applied on top of the fixture's
/// configuration (typically `jobs`).
pub fn verify_fixture_with(dir: &Path, overrides: RunConfig) -> Result<Verification> {
    let fixture = FixtureProject::load(dir)?;
    let cfg = fixture.config.clone().overlay(overrides);
    let run = run_pipeline(&cfg)?;
    Ok(match compare(&fixture, &run) {
        Some(diff) => Verification::Fail { first_difference: diff },
        None => Verification::Pass {
            mutants: run.mutants.len(),
        },
    })
}

/// First difference between the fixture's expectations and `run`.
pub fn compare(fixture: &FixtureProject, run: &PipelineRun) -> Option<String> {
    let exp = &fixture.expected_mutants;
    for (i, (e, a)) in exp.iter().zip(&run.mutants).enumerate() {
        if e != a {
            return Some(format!("mutants.jsonl record {}: expected {}, got {}", i + 1, e.id, a.id));
        }
    }
    if exp.len() != run.mutants.len() {
        return Some(format!("mutants.jsonl: expected {} records, got {}", exp.len(), run.mutants.len()));
    }
    let exp = &fixture.expected_outcomes;
    for (i, (e, a)) in exp.iter().zip(&run.outcomes).enumerate() {
        if e.mutant_id != a.mutant_id || e.verdict != a.verdict {
            return Some(format!(
                "outcomes.jsonl record {} ({}): expected {:?}, got {:?} ({})",
                i + 1,
                e.mutant_id,
                e.verdict,
                a.verdict,
                a.detail
            ));
        }
    }
    if exp.len() != run.outcomes.len() {
        return Some(format!("outcomes.jsonl: expected {} records, got {}", exp.len(), run.outcomes.len()));
    }
    compare_gap(&fixture.expected_gap, &run.gap)
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-9,
        (None, None) => true,
        _ => false,
    }
}

fn report_diff(e: &FileGapReport, a: &FileGapReport) -> Option<String> {
    let counts = [
        ("mutants_total", e.mutants_total, a.mutants_total),
        ("mutants_valid", e.mutants_valid, a.mutants_valid),
        ("mutants_on_covered_lines", e.mutants_on_covered_lines, a.mutants_on_covered_lines),
        ("killed", e.killed, a.killed),
        ("killed_on_covered_lines", e.killed_on_covered_lines, a.killed_on_covered_lines),
        ("covered_lines", e.covered_lines, a.covered_lines),
        ("instrumented_lines", e.instrumented_lines, a.instrumented_lines),
    ];
    for (name, x, y) in counts {
        if x != y {
            return Some(format!("{name}: expected {x}, got {y}"));
        }
    }
    let values = [
        ("coverage", e.coverage, a.coverage),
        ("mutation_score", e.mutation_score, a.mutation_score),
        ("covered_mutation_score", e.covered_mutation_score, a.covered_mutation_score),
        ("raw_gap", e.raw_gap, a.raw_gap),
        ("covered_gap", e.covered_gap, a.covered_gap),
    ];
    for (name, x, y) in values {
        if !close(x, y) {
            return Some(format!("{name}: expected {x:?}, got {y:?}"));
        }
    }
    None
}

pub fn compare_gap(expected: &GapDocument, actual: &GapDocument) -> Option<String> {
    let (e, a) = (&expected.summary, &actual.summary);
    for (x, y) in e.files.iter().zip(&a.files) {
        if x.path != y.path {
            return Some(format!("gap.json file {}: got {}", x.path, y.path));
        }
        if let Some(d) = report_diff(x, y) {
            return Some(format!("gap.json file {}: {d}", x.path));
        }
    }
    if e.files.len() != a.files.len() {
        return Some(format!("gap.json: expected {} files, got {}", e.files.len(), a.files.len()));
    }
    if let Some(d) = report_diff(&e.as_report("<project>"), &a.as_report("<project>")) {
        return Some(format!("gap.json project totals: {d}"));
    }
    let paths = |d: &GapDocument| d.suspects.iter().map(|s| s.path.clone()).collect::<Vec<_>>();
    if paths(expected) != paths(actual) {
        return Some(format!("gap.json suspects: expected {:?}, got {:?}", paths(expected), paths(actual)));
    }
    None
}

/// Error unless every bundled fixture verifies.
pub fn verify_all(overrides: RunConfig) -> Result<usize> {
    let mut n = 0;
    for dir in bundled() {
        match verify_fixture_with(&dir, overrides.clone())? {
            Verification::Pass { mutants } => n += mutants,
            Verification::Fail { first_difference } => {
                return Err(Error::Integrity(format!("{}: {first_difference}", dir.display())))
            }
        }
    }
    Ok(n)
}
