//! LCOV tracefile ingestion and per-file line-coverage queries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Line hit counts for one source file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileCoverage {
    /// Instrumented line -> summed hit count.
    pub hits: BTreeMap<usize, u64>,
}

impl FileCoverage {
    pub fn instrumented(&self) -> BTreeSet<usize> {
        self.hits.keys().copied().collect()
    }

    pub fn covered(&self) -> BTreeSet<usize> {
        self.hits
            .iter()
            .filter(|(_, &h)| h > 0)
            .map(|(&l, _)| l)
            .collect()
    }

    pub fn instrumented_count(&self) -> usize {
        self.hits.len()
    }

    pub fn covered_count(&self) -> usize {
        self.hits.values().filter(|&&h| h > 0).count()
    }

    fn add(&mut self, line: usize, hits: u64) {
        *self.hits.entry(line).or_insert(0) += hits;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageMap {
    pub entries: BTreeMap<String, FileCoverage>,
}

/// Normalizes a path to repository-relative form with `/` separators.
pub fn normalize_path(raw: &str, project_root: Option<&Path>) -> String {
    let mut p = raw.trim().replace('\\', "/");
    if let Some(root) = project_root {
        let root = root.to_string_lossy().replace('\\', "/");
        let root = root.trim_end_matches('/');
        if !root.is_empty() {
            if let Some(rest) = p.strip_prefix(root) {
                if let Some(rest) = rest.strip_prefix('/') {
                    p = rest.to_string();
                }
            }
        }
    }
    while let Some(rest) = p.strip_prefix("./") {
        p = rest.to_string();
    }
    p
}

impl CoverageMap {
    pub fn get(&self, path: &str) -> Option<&FileCoverage> {
        self.entries.get(path)
    }

    /// Folds `other` into `self`, summing hit counts line by line.
    pub fn merge(&mut self, other: &CoverageMap) {
        for (path, file) in &other.entries {
            let dst = self.entries.entry(path.clone()).or_default();
            for (&line, &hits) in &file.hits {
                dst.add(line, hits);
            }
        }
    }

    /// Canonical LCOV text: sorted paths, sorted `DA` lines, recomputed
    /// `LF`/`LH`.
    pub fn render_lcov(&self) -> String {
        let mut out = String::new();
        for (path, file) in &self.entries {
            let _ = writeln!(out, "SF:{path}");
            for (line, hits) in &file.hits {
                let _ = writeln!(out, "DA:{line},{hits}");
            }
            let _ = writeln!(out, "LF:{}", file.instrumented_count());
            let _ = writeln!(out, "LH:{}", file.covered_count());
            out.push_str("end_of_record\n");
        }
        out
    }
}

/// Parses LCOV text. `source_name` only labels errors.
pub fn parse_lcov(report_text: &str, source_name: &str) -> Result<CoverageMap> {
    parse_lcov_rooted(report_text, source_name, None)
}

/// Like [`parse_lcov`], stripping `project_root` from absolute `SF:` paths.
pub fn parse_lcov_rooted(
    report_text: &str,
    source_name: &str,
    project_root: Option<&Path>,
) -> Result<CoverageMap> {
    let err = |line: usize, reason: String| Error::LcovParse {
        path: source_name.to_string(),
        line,
        reason,
    };
    let mut map = CoverageMap::default();
    let mut current: Option<String> = None;
    for (idx, raw) in report_text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "end_of_record" {
            if current.take().is_none() {
                return Err(err(line_no, "end_of_record without SF".into()));
            }
            continue;
        }
        let Some((tag, value)) = line.split_once(':') else {
            return Err(err(line_no, format!("unrecognised line `{line}`")));
        };
        match tag {
            "SF" => {
                let path = normalize_path(value, project_root);
                if path.is_empty() {
                    return Err(err(line_no, "empty SF path".into()));
                }
                map.entries.entry(path.clone()).or_default();
                current = Some(path);
            }
            "DA" => {
                let Some(path) = current.as_ref() else {
                    return Err(err(line_no, "DA outside of an SF record".into()));
                };
                let (line_num, hits) = parse_da(value).ok_or_else(|| {
                    err(line_no, format!("expected `DA:<line>,<hits>`, got `{line}`"))
                })?;
                map.entries.get_mut(path).expect("entry exists").add(line_num, hits);
            }
            // Only line data matters; everything else is recomputed or unused.
            _ => {}
        }
    }
    Ok(map)
}

fn parse_da(value: &str) -> Option<(usize, u64)> {
    let mut parts = value.split(',');
    let line: usize = parts.next()?.trim().parse().ok()?;
    let hits_raw = parts.next()?.trim();
    // An optional third field carries a checksum.
    if parts.count() > 1 || line == 0 {
        return None;
    }
    // Some producers emit negative or overflowing counts; treat them as hits.
    let hits = match hits_raw.parse::<u64>() {
        Ok(h) => h,
        Err(_) => {
            let v: i128 = hits_raw.parse().ok()?;
            if v < 0 {
                1
            } else {
                u64::MAX
            }
        }
    };
    Some((line, hits))
}

pub fn read_lcov(path: &Path, project_root: Option<&Path>) -> Result<CoverageMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lcov_rooted(&text, &path.display().to_string(), project_root)
}

fn entry<'a>(cov: &'a CoverageMap, path: &str) -> Result<&'a FileCoverage> {
    match cov.get(path) {
        Some(f) if f.instrumented_count() > 0 => Ok(f),
        _ => Err(Error::NoCoverageData(path.to_string())),
    }
}

/// `(covered, instrumented)` line counts.
pub fn line_counts(cov: &CoverageMap, path: &str) -> Result<(usize, usize)> {
    let f = entry(cov, path)?;
    Ok((f.covered_count(), f.instrumented_count()))
}

pub fn file_line_coverage(cov: &CoverageMap, path: &str) -> Result<f64> {
    let (c, i) = line_counts(cov, path)?;
    Ok(c as f64 / i as f64)
}

pub fn covered_lines(cov: &CoverageMap, path: &str) -> Result<BTreeSet<usize>> {
    Ok(entry(cov, path)?.covered())
}
