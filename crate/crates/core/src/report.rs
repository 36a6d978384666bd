//! Ranking, suspect flagging and report rendering.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{FileGapReport, ProjectGapSummary, ScoreOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScoreScope {
    #[default]
    Raw,
    Covered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuspectRule {
    pub min_coverage: f64,
    pub max_mutation_score: f64,
    pub scope: ScoreScope,
}

impl Default for SuspectRule {
    fn default() -> Self {
        SuspectRule {
            min_coverage: 0.80,
            max_mutation_score: 0.20,
            scope: ScoreScope::Raw,
        }
    }
}

impl SuspectRule {
    pub fn validate(&self) -> Result<()> {
        if self.min_coverage <= self.max_mutation_score {
            return Err(Error::Config(
                "suspect min_coverage must exceed max_mutation_score".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suspect {
    pub path: String,
    pub coverage: f64,
    pub mutation_score: f64,
    pub scope: ScoreScope,
}

/// Files ordered by descending covered gap, ties by path. Files without a
/// covered gap come back separately, in path order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking<'a> {
    pub ranked: Vec<&'a FileGapReport>,
    pub unranked: Vec<&'a FileGapReport>,
}

pub fn rank_by_covered_gap(reports: &[FileGapReport]) -> Ranking<'_> {
    let (mut ranked, mut unranked): (Vec<_>, Vec<_>) =
        reports.iter().partition(|r| r.covered_gap.is_some());
    ranked.sort_by(|a, b| {
        let (ga, gb) = (a.covered_gap.unwrap(), b.covered_gap.unwrap());
        gb.partial_cmp(&ga)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.path.cmp(&b.path))
    });
    unranked.sort_by(|a, b| a.path.cmp(&b.path));
    Ranking { ranked, unranked }
}

pub fn flag_suspects(reports: &[FileGapReport], rule: &SuspectRule) -> Vec<Suspect> {
    reports
        .iter()
        .filter_map(|r| {
            let coverage = r.coverage?;
            let score = match rule.scope {
                ScoreScope::Raw => r.mutation_score,
                ScoreScope::Covered => r.covered_mutation_score,
            }?;
            (coverage > rule.min_coverage && score < rule.max_mutation_score).then(|| Suspect {
                path: r.path.clone(),
                coverage,
                mutation_score: score,
                scope: rule.scope,
            })
        })
        .collect()
}

/// Contents of `gap.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapDocument {
    pub scoring: ScoreOptions,
    pub suspect_rule: SuspectRule,
    pub suspects: Vec<Suspect>,
    #[serde(flatten)]
    pub summary: ProjectGapSummary,
}

impl GapDocument {
    pub fn new(summary: ProjectGapSummary, scoring: ScoreOptions, rule: SuspectRule) -> Self {
        GapDocument {
            scoring,
            suspect_rule: rule,
            suspects: flag_suspects(&summary.files, &rule),
            summary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// One decimal, half away from zero; `—` for absent values.
pub fn fmt1(v: Option<f64>) -> String {
    match v {
        None => "—".into(),
        Some(x) => {
            let r = (x * 10.0).round() / 10.0;
            format!("{:.1}", if r == 0.0 { 0.0 } else { r })
        }
    }
}

fn pct(v: Option<f64>) -> String {
    fmt1(v.map(|x| 100.0 * x))
}

/// The five numeric columns of a row: coverage, mutation score, covered
/// mutation score, raw gap, covered gap.
pub fn numeric_cells(r: &FileGapReport) -> [String; 5] {
    let available = r.coverage_available();
    [
        pct(r.coverage),
        pct(r.mutation_score),
        pct(r.covered_mutation_score),
        fmt1(r.raw_gap.filter(|_| available)),
        fmt1(r.covered_gap.filter(|_| available)),
    ]
}

fn table(out: &mut String, rows: &[(String, [String; 5])]) {
    let path_w = rows.iter().map(|(p, _)| p.chars().count()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..5)
        .map(|i| rows.iter().map(|(_, c)| c[i].chars().count()).max().unwrap_or(0))
        .collect();
    for (path, cells) in rows {
        let mut line = format!("{path:<path_w$}");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(line, "  {c:>w$}");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
}

pub fn render_text(doc: &GapDocument) -> String {
    let s = &doc.summary;
    let mut out = String::from("oracle gap report\n");
    if s.files.is_empty() {
        out.push_str("no analyzable files\n");
        return out;
    }
    let _ = writeln!(
        out,
        "files: {} analyzed, {} without coverage; mutants: {} total, {} valid, {} killed",
        s.files_analyzed,
        s.files_without_coverage.len(),
        s.mutants_total,
        s.mutants_valid,
        s.killed
    );
    let ranking = rank_by_covered_gap(&s.files);
    let mut rows = vec![(
        "path".to_string(),
        ["cov", "mut", "cmut", "raw", "cgap"].map(String::from),
    )];
    rows.push(("<project>".into(), numeric_cells(&s.as_report("<project>"))));
    for r in ranking.ranked.iter().chain(&ranking.unranked) {
        rows.push((r.path.clone(), numeric_cells(r)));
    }
    out.push('\n');
    table(&mut out, &rows);
    out.push('\n');
    if doc.suspects.is_empty() {
        out.push_str("suspects: none\n");
    } else {
        let _ = writeln!(
            out,
            "suspects (coverage > {}%, {} mutation score < {}%):",
            fmt1(Some(100.0 * doc.suspect_rule.min_coverage)),
            match doc.suspect_rule.scope {
                ScoreScope::Raw => "raw",
                ScoreScope::Covered => "covered",
            },
            fmt1(Some(100.0 * doc.suspect_rule.max_mutation_score)),
        );
        for sus in &doc.suspects {
            let _ = writeln!(
                out,
                "  {}  coverage {}%  score {}%",
                sus.path,
                pct(Some(sus.coverage)),
                pct(Some(sus.mutation_score))
            );
        }
    }
    out
}

pub fn render_csv(reports: &[FileGapReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if reports.is_empty() {
        let _ = w.write_record(CSV_COLUMNS);
    }
    for r in reports {
        w.serialize(r).expect("report serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

const CSV_COLUMNS: &[&str] = &[
    "path",
    "coverage",
    "mutants_total",
    "mutants_valid",
    "mutants_on_covered_lines",
    "killed",
    "killed_on_covered_lines",
    "mutation_score",
    "covered_mutation_score",
    "raw_gap",
    "covered_gap",
    "covered_lines",
    "instrumented_lines",
];

pub fn render(doc: &GapDocument, format: Format) -> String {
    match format {
        Format::Text => render_text(doc),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(doc).expect("document serializes");
            s.push('\n');
            s
        }
        Format::Csv => render_csv(&doc.summary.files),
    }
}

pub fn render_named(doc: &GapDocument, format: &str) -> Result<String> {
    Ok(render(doc, format.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{summarize_project, Tally};

    fn with_gap(path: &str, covered_gap: Option<f64>) -> FileGapReport {
        let mut r = FileGapReport::from_counts(path, Some((1, 1)), 1, Tally { killed: 1, valid: 1 }, Tally::default());
        r.covered_gap = covered_gap;
        r
    }

    fn cov_score(path: &str, covered: u64, killed: u64) -> FileGapReport {
        FileGapReport::from_counts(
            path,
            Some((covered, 100)),
            100,
            Tally { killed, valid: 100 },
            Tally { killed, valid: 100 },
        )
    }

    fn paths(rs: &[&FileGapReport]) -> Vec<String> {
        rs.iter().map(|r| r.path.clone()).collect()
    }

    #[test]
    fn ranking_descending_with_ties_by_path() {
        let rs = vec![with_gap("a", Some(30.0)), with_gap("b", Some(-5.0)), with_gap("c", Some(12.0))];
        assert_eq!(paths(&rank_by_covered_gap(&rs).ranked), ["a", "c", "b"]);
        let eq = vec![with_gap("z", Some(1.0)), with_gap("m", Some(1.0)), with_gap("a", Some(1.0))];
        assert_eq!(paths(&rank_by_covered_gap(&eq).ranked), ["a", "m", "z"]);
        let mixed = vec![with_gap("q", None), with_gap("p", Some(0.0)), with_gap("b", None)];
        let r = rank_by_covered_gap(&mixed);
        assert_eq!(paths(&r.ranked), ["p"]);
        assert_eq!(paths(&r.unranked), ["b", "q"]);
    }

    #[test]
    fn suspect_thresholds() {
        let rule = SuspectRule::default();
        let rs = vec![cov_score("x", 85, 15), cov_score("y", 85, 50), cov_score("z", 50, 10)];
        let s = flag_suspects(&rs, &rule);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].path, "x");
        assert_eq!((s[0].coverage, s[0].mutation_score), (0.85, 0.15));
        // Thresholds are strict.
        assert!(flag_suspects(&[cov_score("e", 80, 10)], &rule).is_empty());
        assert!(flag_suspects(&[cov_score("e", 90, 20)], &rule).is_empty());
    }

    #[test]
    fn bitcoin_style_row() {
        // Unrounded operands: 98.66% coverage, 75.78% score, 83.14% covered
        // score. The covered gap 15.52 rounds to 15.5, whereas rounding the
        // operands first would give 98.7 - 83.1 = 15.6.
        let r = FileGapReport::from_counts(
            "src/consensus/tx_verify.cpp",
            Some((4933, 5000)),
            10000,
            Tally { killed: 7578, valid: 10000 },
            Tally { killed: 4157, valid: 5000 },
        );
        assert_eq!(numeric_cells(&r), ["98.7", "75.8", "83.1", "22.9", "15.5"].map(String::from));
        let doc = GapDocument::new(summarize_project(vec![r]).unwrap(), ScoreOptions::default(), SuspectRule::default());
        let text = render_text(&doc);
        assert!(text.contains("98.7  75.8  83.1  22.9  15.5"), "{text}");
    }

    #[test]
    fn half_away_from_zero() {
        assert_eq!(fmt1(Some(0.25)), "0.3");
        assert_eq!(fmt1(Some(-0.25)), "-0.3");
        assert_eq!(fmt1(Some(-0.04)), "0.0");
        assert_eq!(fmt1(None), "—");
    }

    #[test]
    fn empty_project_text() {
        let summary = ProjectGapSummary::empty();
        let doc = GapDocument::new(summary, ScoreOptions::default(), SuspectRule::default());
        assert_eq!(render_text(&doc), "oracle gap report\nno analyzable files\n");
        assert!(render_csv(&[]).starts_with("path,coverage,mutants_total"));
    }

    #[test]
    fn csv_and_json_formats() {
        let doc = GapDocument::new(
            summarize_project(vec![cov_score("a.c", 85, 15)]).unwrap(),
            ScoreOptions::default(),
            SuspectRule::default(),
        );
        let csv = render_named(&doc, "csv").unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert!(lines.next().unwrap().starts_with("a.c,0.85,100,100,100,15,15,0.15,0.15,"));
        let json = render_named(&doc, "json").unwrap();
        let back: GapDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
        assert!(matches!(render_named(&doc, "html"), Err(Error::UnknownFormat(_))));
    }

    #[test]
    fn unavailable_coverage_renders_dash() {
        let r = FileGapReport::from_counts("n.c", None, 3, Tally { killed: 1, valid: 3 }, Tally::default());
        let cells = numeric_cells(&r);
        assert_eq!(cells[0], "—");
        assert_eq!(cells[3], "—");
        assert_eq!(cells[4], "—");
    }
}
