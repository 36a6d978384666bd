//! Regression, correlation and variance over per-file gap data.
//!
//! Everything is double precision with Neumaier-compensated sums and
//! two-pass centering. Variances are population variances unless a
//! [`VarianceKind::Sample`] is asked for explicitly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::FileGapReport;
use crate::sampling::Bucket;

/// Neumaier compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| compensated_sum(values.iter().copied()) / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceKind {
    #[default]
    Population,
    Sample,
}

/// Variance of `values`; `None` for fewer than two values.
pub fn variance(values: &[f64], kind: VarianceKind) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    let denom = match kind {
        VarianceKind::Population => values.len(),
        VarianceKind::Sample => values.len() - 1,
    };
    Some(ss / denom as f64)
}

struct Moments {
    mean_x: f64,
    mean_y: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

fn moments(xs: &[f64], ys: &[f64]) -> Result<Moments> {
    if xs.len() != ys.len() {
        return Err(Error::Degenerate(format!(
            "series lengths differ ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Degenerate("need at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite value".into()));
    }
    let mean_x = mean(xs).expect("non-empty");
    let mean_y = mean(ys).expect("non-empty");
    let dx: Vec<f64> = xs.iter().map(|x| x - mean_x).collect();
    let dy: Vec<f64> = ys.iter().map(|y| y - mean_y).collect();
    Ok(Moments {
        mean_x,
        mean_y,
        sxx: compensated_sum(dx.iter().map(|d| d * d)),
        syy: compensated_sum(dy.iter().map(|d| d * d)),
        sxy: compensated_sum(dx.iter().zip(&dy).map(|(a, b)| a * b)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn linear_regression(xs: &[f64], ys: &[f64]) -> Result<RegressionFit> {
    let m = moments(xs, ys)?;
    if m.sxx == 0.0 {
        return Err(Error::Degenerate("all x values are equal".into()));
    }
    if m.syy == 0.0 {
        return Err(Error::Degenerate("all y values are equal".into()));
    }
    let slope = m.sxy / m.sxx;
    let intercept = m.mean_y - slope * m.mean_x;
    let r = correlation(&m);
    let residuals = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    Ok(RegressionFit {
        slope,
        intercept,
        r,
        r_squared: r * r,
        residuals,
    })
}

fn correlation(m: &Moments) -> f64 {
    (m.sxy / (m.sxx * m.syy).sqrt()).clamp(-1.0, 1.0)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let m = moments(xs, ys)?;
    if m.sxx == 0.0 || m.syy == 0.0 {
        return Err(Error::Degenerate("zero variance series".into()));
    }
    Ok(correlation(&m))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    moments(xs, ys)?;
    pearson(&mid_ranks(xs), &mid_ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapKind {
    Raw,
    Covered,
}

impl GapKind {
    pub fn of(&self, r: &FileGapReport) -> Option<f64> {
        match self {
            GapKind::Raw => r.raw_gap,
            GapKind::Covered => r.covered_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketVariance {
    pub kind: VarianceKind,
    pub gap: GapKind,
    pub per_bucket: BTreeMap<Bucket, Option<f64>>,
    pub counts: BTreeMap<Bucket, usize>,
    pub overall: Option<f64>,
}

/// Gap variance per coverage bucket and over all reports with a defined gap.
pub fn bucket_variance(reports: &[FileGapReport], gap: GapKind, kind: VarianceKind) -> BucketVariance {
    let mut grouped: BTreeMap<Bucket, Vec<f64>> = Bucket::ALL.iter().map(|b| (*b, vec![])).collect();
    let mut all = Vec::new();
    for r in reports {
        let (Some(g), true) = (gap.of(r), r.coverage_available()) else {
            continue;
        };
        let b = Bucket::for_lines(r.covered_lines, r.instrumented_lines);
        grouped.get_mut(&b).expect("bucket").push(g);
        all.push(g);
    }
    BucketVariance {
        kind,
        gap,
        counts: grouped.iter().map(|(b, v)| (*b, v.len())).collect(),
        per_bucket: grouped.iter().map(|(b, v)| (*b, variance(v, kind))).collect(),
        overall: variance(&all, kind),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupedVariance {
    /// Mean of the per-group variances over groups with two or more values.
    pub mean_within: f64,
    pub overall: f64,
    pub groups_used: usize,
}

pub fn grouped_variance(groups: &[Vec<f64>], kind: VarianceKind) -> Result<GroupedVariance> {
    if groups.len() < 2 {
        return Err(Error::Degenerate("need at least two groups".into()));
    }
    let within: Vec<f64> = groups.iter().filter_map(|g| variance(g, kind)).collect();
    if within.is_empty() {
        return Err(Error::Degenerate("every group has fewer than two values".into()));
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    Ok(GroupedVariance {
        mean_within: mean(&within).expect("non-empty"),
        overall: variance(&all, kind).expect("at least two values"),
        groups_used: within.len(),
    })
}

/// A statistic, or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Stat<T> {
    Value(T),
    Absent { absent: String },
}

impl<T> Stat<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Stat::Value(v) => Some(v),
            Stat::Absent { .. } => None,
        }
    }
}

impl<T> From<Result<T>> for Stat<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Stat::Value(v),
            Err(e) => Stat::Absent { absent: e.to_string() },
        }
    }
}

/// Per-file values in percentage points, for files with coverage and a
/// defined mutation score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub group: String,
    pub path: String,
    pub coverage: f64,
    pub mutation_score: f64,
    pub raw_gap: f64,
    pub covered_mutation_score: Option<f64>,
    pub covered_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub variance_kind: VarianceKind,
    pub files: usize,
    pub groups: usize,
    /// Mutation score on coverage.
    pub regression_raw: Stat<RegressionFit>,
    /// Covered mutation score on coverage, over files that have one.
    pub regression_covered: Stat<RegressionFit>,
    pub pearson_coverage_raw_gap: Stat<f64>,
    pub pearson_coverage_covered_gap: Stat<f64>,
    /// Agreement between rankings by raw gap and by covered gap.
    pub spearman_raw_covered_gap: Stat<f64>,
    pub bucket_variance_raw: BucketVariance,
    pub bucket_variance_covered: BucketVariance,
    pub grouped_variance_raw: Stat<GroupedVariance>,
    pub grouped_variance_covered: Stat<GroupedVariance>,
    pub points: Vec<Point>,
}

pub fn corpus_points(groups: &[(String, Vec<FileGapReport>)]) -> Vec<Point> {
    let pct = |v: f64| v * 100.0;
    let mut out = Vec::new();
    for (group, reports) in groups {
        for r in reports {
            let (Some(c), Some(s), Some(g)) = (r.coverage, r.mutation_score, r.raw_gap) else {
                continue;
            };
            out.push(Point {
                group: group.clone(),
                path: r.path.clone(),
                coverage: pct(c),
                mutation_score: pct(s),
                raw_gap: g,
                covered_mutation_score: r.covered_mutation_score.map(pct),
                covered_gap: r.covered_gap,
            });
        }
    }
    out
}

/// Corpus-level statistics over gap reports grouped by project. Needs at
/// least two analyzable files; individual statistics that are undefined on
/// the data are reported absent.
pub fn corpus_stats(groups: &[(String, Vec<FileGapReport>)], kind: VarianceKind) -> Result<CorpusStats> {
    let points = corpus_points(groups);
    if points.len() < 2 {
        return Err(Error::Degenerate(format!(
            "statistics need at least two files with coverage and a mutation score, got {}",
            points.len()
        )));
    }
    let cov: Vec<f64> = points.iter().map(|p| p.coverage).collect();
    let score: Vec<f64> = points.iter().map(|p| p.mutation_score).collect();
    let raw: Vec<f64> = points.iter().map(|p| p.raw_gap).collect();
    let with_covered: Vec<&Point> = points.iter().filter(|p| p.covered_gap.is_some()).collect();
    let c_cov: Vec<f64> = with_covered.iter().map(|p| p.coverage).collect();
    let c_score: Vec<f64> = with_covered.iter().filter_map(|p| p.covered_mutation_score).collect();
    let c_gap: Vec<f64> = with_covered.iter().filter_map(|p| p.covered_gap).collect();
    let c_raw: Vec<f64> = with_covered.iter().map(|p| p.raw_gap).collect();

    let all: Vec<FileGapReport> = groups.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    let grouped = |gap: GapKind| -> Stat<GroupedVariance> {
        let values: Vec<Vec<f64>> = groups
            .iter()
            .map(|(_, rs)| rs.iter().filter(|r| r.coverage_available()).filter_map(|r| gap.of(r)).collect())
            .collect();
        grouped_variance(&values, kind).into()
    };
    Ok(CorpusStats {
        variance_kind: kind,
        files: points.len(),
        groups: groups.len(),
        regression_raw: linear_regression(&cov, &score).into(),
        regression_covered: linear_regression(&c_cov, &c_score).into(),
        pearson_coverage_raw_gap: pearson(&cov, &raw).into(),
        pearson_coverage_covered_gap: pearson(&c_cov, &c_gap).into(),
        spearman_raw_covered_gap: spearman(&c_raw, &c_gap).into(),
        bucket_variance_raw: bucket_variance(&all, GapKind::Raw, kind),
        bucket_variance_covered: bucket_variance(&all, GapKind::Covered, kind),
        grouped_variance_raw: grouped(GapKind::Raw),
        grouped_variance_covered: grouped(GapKind::Covered),
        points,
    })
}

fn cell(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(v) => format!("{v:.digits$}"),
        None => "—".into(),
    }
}

/// Aligned plain-text rendering of [`CorpusStats`].
pub fn render_stats_text(s: &CorpusStats) -> String {
    let kind = match s.variance_kind {
        VarianceKind::Population => "population",
        VarianceKind::Sample => "sample",
    };
    let mut rows: Vec<(String, String)> = vec![
        ("files".into(), s.files.to_string()),
        ("groups".into(), s.groups.to_string()),
    ];
    for (name, fit) in [("coverage~score", &s.regression_raw), ("coverage~covered score", &s.regression_covered)] {
        let f = fit.value();
        rows.push((format!("{name} slope"), cell(f.map(|f| f.slope), 4)));
        rows.push((format!("{name} intercept"), cell(f.map(|f| f.intercept), 4)));
        rows.push((format!("{name} r"), cell(f.map(|f| f.r), 4)));
        rows.push((format!("{name} r^2"), cell(f.map(|f| f.r_squared), 4)));
    }
    rows.push(("pearson coverage/raw gap".into(), cell(s.pearson_coverage_raw_gap.value().copied(), 4)));
    rows.push(("pearson coverage/covered gap".into(), cell(s.pearson_coverage_covered_gap.value().copied(), 4)));
    rows.push(("spearman raw/covered gap".into(), cell(s.spearman_raw_covered_gap.value().copied(), 4)));
    for bv in [&s.bucket_variance_raw, &s.bucket_variance_covered] {
        let gap = match bv.gap {
            GapKind::Raw => "raw",
            GapKind::Covered => "covered",
        };
        for (b, v) in &bv.per_bucket {
            rows.push((format!("{gap} gap variance {b} (n={})", bv.counts[b]), cell(*v, 2)));
        }
        rows.push((format!("{gap} gap variance overall"), cell(bv.overall, 2)));
    }
    for (gap, gv) in [("raw", &s.grouped_variance_raw), ("covered", &s.grouped_variance_covered)] {
        let v = gv.value();
        rows.push((format!("{gap} gap mean within-group variance"), cell(v.map(|g| g.mean_within), 2)));
        rows.push((format!("{gap} gap overall variance"), cell(v.map(|g| g.overall), 2)));
    }
    let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut out = format!("corpus statistics ({kind} variance)\n");
    for (k, v) in rows {
        out.push_str(&format!("{k:<width$}  {v:>10}\n"));
    }
    out
}

/// `(path, coverage, score, gap, residual)` rows for plotting.
pub fn render_points_csv(s: &CorpusStats) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["group", "path", "coverage", "mutation_score", "raw_gap", "residual"])
        .expect("in-memory write");
    let residuals = s.regression_raw.value().map(|f| &f.residuals);
    for (i, p) in s.points.iter().enumerate() {
        let res = residuals.map(|r| r[i].to_string()).unwrap_or_default();
        w.write_record([
            p.group.clone(),
            p.path.clone(),
            p.coverage.to_string(),
            p.mutation_score.to_string(),
            p.raw_gap.to_string(),
            res,
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(path: &str, covered: u64, lines: u64, killed: u64, valid: u64) -> FileGapReport {
        let t = crate::metrics::Tally { killed, valid };
        FileGapReport::from_counts(path, Some((covered, lines)), valid, t, t)
    }

    #[test]
    fn corpus_needs_two_files() {
        let one = vec![("p".to_string(), vec![report("a", 5, 10, 1, 4)])];
        assert!(matches!(corpus_stats(&one, VarianceKind::Population), Err(Error::Degenerate(_))));
    }

    #[test]
    fn corpus_two_collinear_points() {
        let g = vec![(
            "p".to_string(),
            vec![report("a", 5, 10, 1, 5), report("b", 10, 10, 2, 5)],
        )];
        let s = corpus_stats(&g, VarianceKind::Population).unwrap();
        assert_eq!(s.regression_raw.value().unwrap().r, 1.0);
        assert_eq!(*s.pearson_coverage_raw_gap.value().unwrap(), 1.0);
        // One group only: no grouped variance.
        assert!(s.grouped_variance_raw.value().is_none());
        let text = render_stats_text(&s);
        assert!(text.contains("population variance"));
        assert_eq!(render_points_csv(&s).lines().count(), 3);
        let json = serde_json::to_value(&s).unwrap();
        assert!(json["grouped_variance_raw"]["absent"].is_string());
    }

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let fit = linear_regression(&xs, &ys).unwrap();
        assert_eq!(fit.slope, 2.0);
        assert_eq!(fit.intercept, 1.0);
        assert_eq!(fit.r, 1.0);
        assert_eq!(fit.r_squared, 1.0);
        assert!(fit.residuals.iter().all(|r| *r == 0.0));
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert_eq!(linear_regression(&xs, &neg).unwrap().r, -1.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_regression(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(linear_regression(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pearson_identity_and_spearman_orderings() {
        let xs = [3.0, 1.0, 4.0, 1.5, 9.0];
        assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
        let ys = [30.0, 10.0, 40.0, 15.0, 90.0];
        assert_eq!(spearman(&xs, &ys).unwrap(), 1.0);
        let rev: Vec<f64> = ys.iter().map(|y| -y).collect();
        assert_eq!(spearman(&xs, &rev).unwrap(), -1.0);
    }

    #[test]
    fn hand_ranked_ties() {
        // xs ranks: 10->1, 20->2.5, 20->2.5, 30->4, 40->5.5, 40->5.5
        let xs = [10.0, 20.0, 20.0, 30.0, 40.0, 40.0];
        assert_eq!(mid_ranks(&xs), vec![1.0, 2.5, 2.5, 4.0, 5.5, 5.5]);
        // ys ranks: 1, 3, 2, 5, 5, 5
        let ys = [1.0, 3.0, 2.0, 7.0, 7.0, 7.0];
        assert_eq!(mid_ranks(&ys), vec![1.0, 3.0, 2.0, 5.0, 5.0, 5.0]);
        // By hand: both rank means are 3.5,
        // dx = [-2.5,-1,-1,0.5,2,2], dy = [-2.5,-0.5,-1.5,1.5,1.5,1.5]
        // Sxy = 6.25+0.5+1.5+0.75+3+3 = 15, Sxx = 6.25+1+1+0.25+4+4 = 16.5,
        // Syy = 6.25+0.25+2.25+2.25+2.25+2.25 = 15.5
        let expected = 15.0 / (16.5f64 * 15.5).sqrt();
        assert!((spearman(&xs, &ys).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn variance_cases() {
        assert_eq!(variance(&[4.0, 4.0, 4.0], VarianceKind::Population), Some(0.0));
        assert_eq!(variance(&[0.0, 10.0], VarianceKind::Population), Some(25.0));
        assert_eq!(variance(&[0.0, 10.0], VarianceKind::Sample), Some(50.0));
        assert_eq!(variance(&[1.0], VarianceKind::Population), None);
    }

    #[test]
    fn grouped_cases() {
        let g = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let v = grouped_variance(&g, VarianceKind::Population).unwrap();
        assert!((v.mean_within - v.overall).abs() < 1e-12);
        let g = vec![vec![5.0, 5.0], vec![9.0, 9.0, 9.0]];
        let v = grouped_variance(&g, VarianceKind::Population).unwrap();
        assert_eq!(v.mean_within, 0.0);
        assert!(v.overall > 0.0);
        assert!(grouped_variance(&[vec![1.0], vec![2.0]], VarianceKind::Population).is_err());
        assert!(grouped_variance(&[vec![1.0, 2.0]], VarianceKind::Population).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let vals = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(vals), 1.0);
    }
}
