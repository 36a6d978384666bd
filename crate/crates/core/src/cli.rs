//! Command-line front end. Each subcommand reads and writes files under the
//! output directory so long campaigns can be stopped and resumed:
//!
//! ```text
//! mutate  -> manifest.json, mutants.jsonl
//! run     -> outcomes.jsonl (checkpointing to outcomes.partial.jsonl)
//! gap     -> gap.json, gap.csv, table on stdout
//! rank    -> ranking on stdout
//! stats   -> stats.json, table on stdout
//! ablate  -> ablation/<config>/gap.json, ablation/ablation_matrix.json
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use walkdir::WalkDir;

use crate::ablation::{self, AblationOptions, ConfigResult, ConfigStatus};
use crate::config::RunConfig;
use crate::coverage::{self, CoverageMap};
use crate::error::{Error, Result};
use crate::executor::{self, CampaignResult, MutantOutcome};
use crate::io;
use crate::metrics::{self, FileGapReport, ProjectGapSummary};
use crate::operators::{self, Mutant, MutationOperator};
use crate::report::{self, Format, GapDocument, ScoreScope};
use crate::sampling::{self, ManifestFile, SamplingManifest};
use crate::stats::{self, VarianceKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_SUSPECTS: i32 = 2;
pub const EXIT_RED_BASELINE: i32 = 3;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MUTANTS_FILE: &str = "mutants.jsonl";
pub const OUTCOMES_FILE: &str = "outcomes.jsonl";
pub const PARTIAL_FILE: &str = "outcomes.partial.jsonl";
pub const GAP_JSON: &str = "gap.json";
pub const GAP_CSV: &str = "gap.csv";
pub const STATS_FILE: &str = "stats.json";
pub const ABLATION_DIR: &str = "ablation";

#[derive(Debug, Parser)]
#[command(name = "oracle-gap", version, about = "Measure the gap between code coverage and mutation score")]
pub struct Cli {
    /// Configuration file (TOML key = value pairs).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample files and generate mutants.
    Mutate(MutateArgs),
    /// Evaluate every mutant against the test suite.
    Run(RunArgs),
    /// Combine coverage and outcomes into per-file gap reports.
    Gap(GapArgs),
    /// Rank files of a gap report by covered gap.
    Rank(RankArgs),
    /// Regression, correlation and variance over one or more gap reports.
    Stats(StatsArgs),
    /// Knock out tests and assertions and measure how the gap moves.
    Ablate(AblateArgs),
    /// Run the pipeline on a bundled fixture and compare with its expectations.
    VerifyFixture(VerifyArgs),
}

#[derive(Debug, Args, Default)]
pub struct ProjectArgs {
    #[arg(long)]
    pub project_root: Option<PathBuf>,
    #[arg(long)]
    pub language: Option<String>,
    /// LCOV tracefile for the project.
    #[arg(long)]
    pub coverage: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MutateArgs {
    #[command(flatten)]
    pub project: ProjectArgs,
    #[arg(long)]
    pub mutant_cap: Option<usize>,
    #[arg(long)]
    pub files_per_bucket: Option<usize>,
    #[arg(long)]
    pub file_cap: Option<usize>,
    /// Skip lines matching this regex (repeatable).
    #[arg(long = "exclude")]
    pub exclusion_patterns: Vec<String>,
    /// Also skip lines that look like logging.
    #[arg(long)]
    pub exclude_logging: bool,
    /// Operator catalog (JSON) replacing the built-in one.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    #[arg(long)]
    pub test_command: Option<String>,
    #[arg(long)]
    pub build_command: Option<String>,
    #[arg(long)]
    pub timeout_factor: Option<f64>,
    #[arg(long)]
    pub min_timeout_ms: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub project: ProjectArgs,
    #[command(flatten)]
    pub campaign: CampaignArgs,
    /// Ignore any checkpoint and start over.
    #[arg(long)]
    pub fresh: bool,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[command(flatten)]
    pub project: ProjectArgs,
    /// stdout format: text, json or csv.
    #[arg(long, default_value = "text")]
    pub format: String,
    /// Exit with status 2 when any file is flagged as suspect.
    #[arg(long)]
    pub fail_on_suspect: bool,
    /// Count timeouts as survivors instead of kills.
    #[arg(long)]
    pub timeout_survives: bool,
    #[arg(long)]
    pub suspect_min_coverage: Option<f64>,
    #[arg(long)]
    pub suspect_max_score: Option<f64>,
    /// Which mutation score the suspect rule looks at: raw or covered.
    #[arg(long)]
    pub suspect_scope: Option<String>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Gap report to rank (default: <output-dir>/gap.json).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Gap reports, one per project (default: <output-dir>/gap.json).
    pub inputs: Vec<PathBuf>,
    /// Use sample (n-1) variances instead of population variances.
    #[arg(long)]
    pub sample_variance: bool,
    /// Also write (coverage, score, gap, residual) points to this CSV file.
    #[arg(long)]
    pub points_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub project: ProjectArgs,
    #[command(flatten)]
    pub campaign: CampaignArgs,
    #[arg(long)]
    pub coverage_command: Option<String>,
    /// Test file whose tests and assertions may be knocked out (repeatable).
    #[arg(long = "test-file")]
    pub test_files: Vec<String>,
    /// Seeded variants per cell with a 50% axis.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Fixture directory containing oracle-gap.toml and expected/.
    pub fixture: PathBuf,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
        }
    };
    init_logging(cli.verbose);
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::RedBaseline(_) => EXIT_RED_BASELINE,
                _ => EXIT_ERROR,
            }
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let global = RunConfig {
        seed: cli.seed,
        jobs: cli.jobs,
        output_dir: cli.output_dir.clone(),
        ..Default::default()
    };
    let cfg = |extra: RunConfig| base.clone().overlay(extra).overlay(global.clone());
    match &cli.command {
        Command::Mutate(a) => {
            let cfg = cfg(RunConfig {
                mutant_cap: a.mutant_cap,
                files_per_bucket: a.files_per_bucket,
                file_cap: a.file_cap,
                exclusion_patterns: a.exclusion_patterns.clone(),
                exclude_logging: a.exclude_logging.then_some(true),
                catalog: a.catalog.clone(),
                ..project_overrides(&a.project)
            });
            let (manifest, mutants) = cmd_mutate(&cfg)?;
            let files: usize = manifest.selected_files.values().map(Vec::len).sum();
            println!(
                "{} mutants over {files} sampled files written to {}",
                mutants.len(),
                cfg.output_dir().display()
            );
            Ok(EXIT_OK)
        }
        Command::Run(a) => {
            let cfg = cfg(RunConfig {
                ..campaign_overrides(&a.campaign, project_overrides(&a.project))
            });
            let result = cmd_run(&cfg, a.fresh)?;
            println!("{}", outcome_summary(&result.outcomes));
            Ok(EXIT_OK)
        }
        Command::Gap(a) => {
            let format: Format = a.format.parse()?;
            let scope = a.suspect_scope.as_deref().map(parse_scope).transpose()?;
            let cfg = cfg(RunConfig {
                timeout_as_kill: a.timeout_survives.then_some(false),
                suspect_min_coverage: a.suspect_min_coverage,
                suspect_max_score: a.suspect_max_score,
                suspect_scope: scope,
                ..project_overrides(&a.project)
            });
            let doc = cmd_gap(&cfg)?;
            print!("{}", report::render(&doc, format));
            if a.fail_on_suspect && !doc.suspects.is_empty() {
                return Ok(EXIT_SUSPECTS);
            }
            Ok(EXIT_OK)
        }
        Command::Rank(a) => {
            let cfg = cfg(RunConfig::default());
            let input = a.input.clone().unwrap_or_else(|| cfg.output_dir().join(GAP_JSON));
            let doc: GapDocument = io::read_json(&input)?;
            print!("{}", render_ranking(&doc.summary.files, a.limit));
            Ok(EXIT_OK)
        }
        Command::Stats(a) => {
            let cfg = cfg(RunConfig::default());
            let inputs = if a.inputs.is_empty() {
                vec![cfg.output_dir().join(GAP_JSON)]
            } else {
                a.inputs.clone()
            };
            let kind = if a.sample_variance {
                VarianceKind::Sample
            } else {
                VarianceKind::Population
            };
            let s = cmd_stats(&inputs, kind)?;
            io::write_json(&cfg.output_dir().join(STATS_FILE), &s)?;
            if let Some(p) = &a.points_csv {
                io::write_atomic(p, stats::render_points_csv(&s).as_bytes())?;
            }
            print!("{}", stats::render_stats_text(&s));
            Ok(EXIT_OK)
        }
        Command::Ablate(a) => {
            let cfg = cfg(RunConfig {
                coverage_command: a.coverage_command.clone(),
                test_files: a.test_files.clone(),
                samples: a.samples,
                ..campaign_overrides(&a.campaign, project_overrides(&a.project))
            });
            let results = cmd_ablate(&cfg)?;
            print!("{}", render_matrix(&ablation::ablation_matrix(&results)));
            Ok(EXIT_OK)
        }
        Command::VerifyFixture(a) => {
            let over = RunConfig {
                jobs: cli.jobs,
                seed: cli.seed,
                ..Default::default()
            };
            match crate::fixtures::verify_fixture_with(&a.fixture, over)? {
                crate::fixtures::Verification::Pass { mutants } => {
                    println!("{}: ok ({mutants} mutants)", a.fixture.display());
                    Ok(EXIT_OK)
                }
                crate::fixtures::Verification::Fail { first_difference } => {
                    println!("{}: MISMATCH {first_difference}", a.fixture.display());
                    Ok(EXIT_ERROR)
                }
            }
        }
    }
}

fn project_overrides(p: &ProjectArgs) -> RunConfig {
    RunConfig {
        project_root: p.project_root.clone(),
        language: p.language.clone(),
        coverage_report: p.coverage.clone(),
        ..Default::default()
    }
}

fn campaign_overrides(c: &CampaignArgs, base: RunConfig) -> RunConfig {
    RunConfig {
        test_command: c.test_command.clone(),
        build_command: c.build_command.clone(),
        timeout_factor: c.timeout_factor,
        min_timeout_ms: c.min_timeout_ms,
        ..base
    }
}

fn parse_scope(s: &str) -> Result<ScoreScope> {
    match s {
        "raw" => Ok(ScoreScope::Raw),
        "covered" => Ok(ScoreScope::Covered),
        other => Err(Error::Config(format!("suspect scope must be raw or covered, got `{other}`"))),
    }
}

const LCOV_HELP: &str = "set coverage_report in the config file or pass --coverage <file>. \
Any LCOV tracefile works, e.g. from `coverage lcov` (Python), `lcov --capture` (C/C++), \
JaCoCo's LCOV export (Java) or `gcov2lcov` (Go)";

pub fn load_coverage(cfg: &RunConfig) -> Result<CoverageMap> {
    let path = cfg
        .coverage_report
        .as_ref()
        .ok_or_else(|| Error::Config(format!("no coverage report configured; {LCOV_HELP}")))?;
    if !path.exists() {
        return Err(Error::Config(format!(
            "coverage report {} not found; {LCOV_HELP}",
            path.display()
        )));
    }
    coverage::read_lcov(path, Some(&cfg.project_root()))
}

pub fn load_operators(cfg: &RunConfig, language: &str) -> Result<Vec<MutationOperator>> {
    match &cfg.catalog {
        Some(path) => operators::load_operator_catalog_file(path, language),
        None => operators::load_operator_catalog(language),
    }
}

/// Repository-relative source files for `language`, skipping copy-excluded
/// directories.
fn discover_sources(root: &Path, language: &str, skip: &[String]) -> Vec<String> {
    let exts = operators::source_extensions(language);
    if exts.is_empty() {
        return vec![];
    }
    let mut out: Vec<String> = WalkDir::new(root)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !skip.iter().any(|s| e.file_name().to_str() == Some(s.as_str())))
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            let rel = e.path().strip_prefix(root).ok()?.to_str()?.replace('\\', "/");
            let ext = rel.rsplit_once('.')?.1;
            exts.contains(&ext).then_some(rel)
        })
        .collect();
    out.sort();
    out
}

fn skip_dirs(cfg: &RunConfig) -> Vec<String> {
    let mut skip: Vec<String> = executor::DEFAULT_COPY_EXCLUDES.iter().map(|s| s.to_string()).collect();
    skip.extend(cfg.copy_excludes.iter().cloned());
    if let Some(name) = cfg.output_dir().file_name().and_then(|n| n.to_str()) {
        skip.push(name.to_string());
    }
    skip
}

/// Samples files by coverage bucket and mutants per file. Pure apart from
/// reading the coverage report and the selected sources.
pub fn plan_mutants(cfg: &RunConfig) -> Result<(SamplingManifest, Vec<Mutant>)> {
    let root = cfg.project_root();
    let language = cfg.language()?;
    let mut cov = load_coverage(cfg)?;
    let before = cov.entries.len();
    cov.entries.retain(|path, _| root.join(path).is_file());
    if cov.entries.len() < before {
        log::warn!("{} coverage records name files outside the project; ignored", before - cov.entries.len());
    }
    let plan = cfg.plan();
    let buckets = sampling::bucket_files(&cov);
    let selected = sampling::sample_buckets(&buckets, &plan);
    let ops = load_operators(cfg, &language)?;
    let exclusions = operators::compile_exclusions(&cfg.exclusions())?;

    let mut mutants = Vec::new();
    let mut per_file = BTreeMap::new();
    for path in selected.values().flatten() {
        let file = root.join(path);
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let comment_lang = if language == "generic" {
            operators::language_for_path(path).unwrap_or("generic")
        } else {
            &language
        };
        let generated = operators::generate_mutants(&text, path, comment_lang, &ops, &exclusions);
        let chosen = sampling::sample_mutants(&generated, path, &plan);
        per_file.insert(
            path.clone(),
            ManifestFile {
                generated: generated.len(),
                selected: chosen.iter().map(|m| m.id.clone()).collect(),
            },
        );
        mutants.extend(chosen);
    }
    let uninstrumented = discover_sources(&root, &language, &skip_dirs(cfg))
        .into_iter()
        .filter(|p| cov.get(p).map(|f| f.instrumented_count() == 0).unwrap_or(true))
        .collect();
    let manifest = SamplingManifest {
        seed: plan.seed,
        plan,
        language,
        buckets,
        selected_files: selected,
        mutants: per_file,
        uninstrumented,
    };
    Ok((manifest, mutants))
}

pub fn cmd_mutate(cfg: &RunConfig) -> Result<(SamplingManifest, Vec<Mutant>)> {
    let (manifest, mutants) = plan_mutants(cfg)?;
    let out = cfg.output_dir();
    io::write_json(&out.join(MANIFEST_FILE), &manifest)?;
    io::write_jsonl(&out.join(MUTANTS_FILE), &mutants)?;
    Ok((manifest, mutants))
}

fn read_mutants(out: &Path) -> Result<Vec<Mutant>> {
    let path = out.join(MUTANTS_FILE);
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} not found; run `oracle-gap mutate` first",
            path.display()
        )));
    }
    io::read_jsonl(&path)
}

/// Outcomes from a checkpoint file. A torn final line from an interrupted
/// write is dropped.
fn read_checkpoint(path: &Path) -> Result<Vec<MutantOutcome>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str::<MutantOutcome>(line) {
            Ok(o) => out.push(o),
            Err(_) if i + 1 == lines.len() => log::warn!("{}: dropping torn last record", path.display()),
            Err(e) => {
                return Err(Error::Json {
                    path: path.to_path_buf(),
                    line: i + 1,
                    source: e,
                })
            }
        }
    }
    Ok(out)
}

/// Runs the campaign over `mutants.jsonl`, resuming from the checkpoint
/// unless `fresh`.
pub fn cmd_run(cfg: &RunConfig, fresh: bool) -> Result<CampaignResult> {
    let out = cfg.output_dir();
    let mutants = read_mutants(&out)?;
    let campaign = cfg.campaign()?;
    let root = cfg.project_root();
    let baseline_ms = executor::baseline_check(&root, &campaign)?;
    let header = executor::campaign_header(&campaign, baseline_ms);

    let partial = out.join(PARTIAL_FILE);
    let wanted: BTreeSet<&str> = mutants.iter().map(|m| m.id.as_str()).collect();
    let done: HashMap<String, MutantOutcome> = if !fresh && partial.exists() {
        read_checkpoint(&partial)?
            .into_iter()
            .filter(|o| wanted.contains(o.mutant_id.as_str()))
            .map(|o| (o.mutant_id.clone(), o))
            .collect()
    } else {
        HashMap::new()
    };
    if !done.is_empty() {
        log::info!("resuming: {} of {} mutants already evaluated", done.len(), mutants.len());
    }
    // Rewrite the checkpoint with only clean records before appending.
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let kept: Vec<&MutantOutcome> = mutants.iter().filter_map(|m| done.get(&m.id)).collect();
    io::write_atomic(&partial, io::to_jsonl(&kept).as_bytes())?;
    let file = OpenOptions::new()
        .append(true)
        .open(&partial)
        .map_err(|e| Error::io(&partial, e))?;
    let sink = Mutex::new(file);
    let outcomes = executor::evaluate_all(&root, &mutants, &campaign, header.timeout_ms, &done, |o| {
        let mut line = serde_json::to_string(o).expect("outcome serializes");
        line.push('\n');
        let mut f = sink.lock().expect("checkpoint lock");
        if let Err(e) = f.write_all(line.as_bytes()).and_then(|_| f.flush()) {
            log::warn!("checkpoint write failed: {e}");
        }
    })?;
    let result = CampaignResult { header, outcomes };
    result.write(&out.join(OUTCOMES_FILE))?;
    let _ = fs::remove_file(&partial);
    Ok(result)
}

fn outcome_summary(outcomes: &[MutantOutcome]) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for o in outcomes {
        *counts.entry(format!("{:?}", o.verdict).to_uppercase()).or_default() += 1;
    }
    let parts: Vec<String> = counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
    format!("{} mutants: {}", outcomes.len(), parts.join(", "))
}

/// Checks that `outcomes` holds exactly one record per mutant.
pub fn check_integrity(mutants: &[Mutant], outcomes: &[MutantOutcome]) -> Result<()> {
    let ids: BTreeSet<&str> = mutants.iter().map(|m| m.id.as_str()).collect();
    let mut seen = BTreeSet::new();
    for o in outcomes {
        if !ids.contains(o.mutant_id.as_str()) {
            return Err(Error::Integrity(format!("outcome for unknown mutant {}", o.mutant_id)));
        }
        if !seen.insert(o.mutant_id.as_str()) {
            return Err(Error::Integrity(format!("duplicate outcome for {}", o.mutant_id)));
        }
    }
    if let Some(missing) = ids.difference(&seen).next() {
        return Err(Error::Integrity(format!("no outcome for mutant {missing}")));
    }
    Ok(())
}

/// Gap document for `files`, in the given order.
pub fn gap_document(
    cfg: &RunConfig,
    files: &[String],
    cov: &CoverageMap,
    mutants: &[Mutant],
    outcomes: &[MutantOutcome],
) -> Result<GapDocument> {
    check_integrity(mutants, outcomes)?;
    let scoring = cfg.scoring();
    let reports = files
        .iter()
        .map(|p| metrics::build_file_report(p, cov, mutants, outcomes, scoring))
        .collect::<Result<Vec<FileGapReport>>>()?;
    let summary = if reports.is_empty() {
        ProjectGapSummary::empty()
    } else {
        metrics::summarize_project(reports)?
    };
    Ok(GapDocument::new(summary, scoring, cfg.suspect_rule()?))
}

/// Files a report covers: every sampled file when a manifest exists,
/// otherwise every file that has mutants.
fn report_files(out: &Path, mutants: &[Mutant]) -> Result<Vec<String>> {
    let path = out.join(MANIFEST_FILE);
    let mut files: BTreeSet<String> = mutants.iter().map(|m| m.path.clone()).collect();
    if path.exists() {
        let manifest: SamplingManifest = io::read_json(&path)?;
        files.extend(manifest.selected_files.into_values().flatten());
    }
    Ok(files.into_iter().collect())
}

pub fn cmd_gap(cfg: &RunConfig) -> Result<GapDocument> {
    let out = cfg.output_dir();
    let mutants = read_mutants(&out)?;
    let outcomes_path = out.join(OUTCOMES_FILE);
    if !outcomes_path.exists() {
        return Err(Error::Config(format!(
            "{} not found; run `oracle-gap run` first",
            outcomes_path.display()
        )));
    }
    let (_, outcomes) = executor::read_outcomes(&outcomes_path)?;
    let cov = load_coverage(cfg)?;
    let files = report_files(&out, &mutants)?;
    let doc = gap_document(cfg, &files, &cov, &mutants, &outcomes)?;
    io::write_json(&out.join(GAP_JSON), &doc)?;
    io::write_atomic(&out.join(GAP_CSV), report::render_csv(&doc.summary.files).as_bytes())?;
    Ok(doc)
}

pub fn render_ranking(reports: &[FileGapReport], limit: Option<usize>) -> String {
    let ranking = report::rank_by_covered_gap(reports);
    let mut rows = vec![["rank", "cgap", "raw", "cov", "cmut", "path"].map(String::from)];
    for (i, r) in ranking.ranked.iter().take(limit.unwrap_or(usize::MAX)).enumerate() {
        let c = report::numeric_cells(r);
        rows.push([
            (i + 1).to_string(),
            c[4].clone(),
            c[3].clone(),
            c[0].clone(),
            c[2].clone(),
            r.path.clone(),
        ]);
    }
    let widths: Vec<usize> = (0..6)
        .map(|k| rows.iter().map(|r| r[k].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for k in 0..5 {
            let _ = write!(line, "{:>w$}  ", row[k], w = widths[k]);
        }
        line.push_str(&row[5]);
        out.push_str(line.trim_end());
        out.push('\n');
    }
    if !ranking.unranked.is_empty() {
        out.push_str("\nunranked (no covered gap):\n");
        for r in &ranking.unranked {
            let _ = writeln!(out, "  {}", r.path);
        }
    }
    out
}

pub fn cmd_stats(inputs: &[PathBuf], kind: VarianceKind) -> Result<stats::CorpusStats> {
    let mut groups = Vec::with_capacity(inputs.len());
    for p in inputs {
        let doc: GapDocument = io::read_json(p)?;
        groups.push((p.display().to_string(), doc.summary.files));
    }
    stats::corpus_stats(&groups, kind)
}

/// Files listed in `test_files`, read from the project root.
fn read_test_files(root: &Path, test_files: &[String]) -> Result<Vec<(String, String)>> {
    test_files
        .iter()
        .map(|rel| {
            let path = root.join(rel);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            Ok((rel.clone(), text))
        })
        .collect()
}

pub fn ablation_options(cfg: &RunConfig) -> Result<AblationOptions> {
    let root = cfg.project_root();
    let report = cfg
        .coverage_report
        .as_ref()
        .ok_or_else(|| Error::Config(format!("ablation needs coverage_report; {LCOV_HELP}")))?;
    let rel = report.strip_prefix(&root).unwrap_or(report);
    Ok(AblationOptions {
        campaign: cfg.campaign()?,
        coverage_command: cfg
            .coverage_command
            .clone()
            .ok_or_else(|| Error::Config("ablation needs coverage_command".into()))?,
        coverage_report: rel.to_string_lossy().into_owned(),
        scoring: cfg.scoring(),
    })
}

/// Runs the seven-shape knockout grid. Mutants come from `mutants.jsonl`
/// when present, otherwise they are sampled afresh.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<ConfigResult>> {
    let root = cfg.project_root();
    let out = cfg.output_dir();
    if cfg.test_files.is_empty() {
        return Err(Error::Config("ablation needs test_files (the files to knock out)".into()));
    }
    let opts = ablation_options(cfg)?;
    let mutants = if out.join(MUTANTS_FILE).exists() {
        read_mutants(&out)?
    } else {
        cmd_mutate(cfg)?.1
    };
    let targets: Vec<String> = if cfg.target_files.is_empty() {
        report_files(&out, &mutants)?
    } else {
        cfg.target_files.clone()
    };
    let mutants: Vec<Mutant> = mutants.into_iter().filter(|m| targets.contains(&m.path)).collect();

    let texts = read_test_files(&root, &cfg.test_files)?;
    let scan = ablation::enumerate_knockout_sites(
        &texts,
        &ablation::compile_patterns(&cfg.assert_patterns())?,
        &ablation::compile_patterns(&cfg.test_patterns())?,
    );
    let scan = ablation::pin_test_cases(scan, &texts, &ablation::compile_patterns(&cfg.keep_test_patterns)?);
    for w in &scan.warnings {
        log::warn!("{w}");
    }
    let grid = ablation::generate_grid(&scan.sites, cfg.samples.unwrap_or(5), cfg.seed())?;
    let dir = out.join(ABLATION_DIR);
    io::write_json(
        &dir.join("grid.json"),
        &serde_json::json!({ "sites": scan.sites, "configurations": grid }),
    )?;
    let rule = cfg.suspect_rule()?;
    let scoring = cfg.scoring();
    let mut write_err = None;
    let results = ablation::run_ablation_grid(&root, &targets, &scan.sites, &grid, &mutants, &opts, |r| {
        let path = dir.join(r.config.label()).join(GAP_JSON);
        let res = match &r.status {
            ConfigStatus::Ok { reports } => {
                let summary = metrics::summarize_project(reports.clone()).unwrap_or_else(|_| ProjectGapSummary::empty());
                io::write_json(&path, &GapDocument::new(summary, scoring, rule))
            }
            ConfigStatus::Failed { reason } => io::write_json(&path, &serde_json::json!({ "failed": reason })),
        };
        if let Err(e) = res {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    io::write_json(&dir.join("ablation_matrix.json"), &ablation::ablation_matrix(&results))?;
    Ok(results)
}

pub fn render_matrix(entries: &[ablation::MatrixEntry]) -> String {
    let f = |v: Option<f64>| report::fmt1(v);
    let mut out = String::from("cell        samples   cgap  d_full  d_prev\n");
    for e in entries {
        let _ = writeln!(
            out,
            "{:<10}  {:>7}  {:>5}  {:>6}  {:>6}",
            e.cell.to_string(),
            e.samples.len(),
            f(e.mean_covered_gap),
            f(e.delta_vs_full),
            f(e.delta_vs_previous)
        );
    }
    out
}
