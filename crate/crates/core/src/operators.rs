//! Mutation-operator catalog and line-oriented mutant generation.
//!
//! Every operator is a regular expression over a single source line plus an
//! ordered list of replacement templates. Templates use the `regex` crate's
//! `${N}` expansion syntax, extended with `#{inc:N}` / `#{dec:N}` which
//! expand to the integer in capture group `N` plus or minus one.
//!
//! Mutants never add or remove lines, so coverage line numbers stay aligned
//! with the mutated file.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN_CATALOG: &str = include_str!("catalog.json");

pub const SUPPORTED_LANGUAGES: &[&str] = &["java", "c", "cpp", "go", "python", "generic"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Arithmetic,
    Relational,
    Logical,
    Constant,
    StatementDeletion,
    ControlFlow,
}

/// On-disk shape of an operator, shared by the built-in table and
/// user-supplied catalog files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub id: String,
    pub match_pattern: String,
    pub replacements: Vec<String>,
    pub languages: Vec<String>,
    pub category: Category,
}

#[derive(Debug, Deserialize)]
struct CatalogFile {
    #[serde(default)]
    #[allow(dead_code)]
    version: Option<u32>,
    operators: Vec<OperatorSpec>,
}

/// A compiled rewrite rule.
#[derive(Debug, Clone)]
pub struct MutationOperator {
    pub id: String,
    pub pattern: Regex,
    pub replacements: Vec<String>,
    pub languages: Vec<String>,
    pub category: Category,
}

impl MutationOperator {
    pub fn compile(spec: &OperatorSpec) -> Result<Self> {
        if spec.replacements.is_empty() {
            return Err(Error::InvalidOperator {
                id: spec.id.clone(),
                reason: "no replacements".into(),
            });
        }
        if spec.languages.is_empty() {
            return Err(Error::InvalidOperator {
                id: spec.id.clone(),
                reason: "no languages".into(),
            });
        }
        for lang in &spec.languages {
            if !SUPPORTED_LANGUAGES.contains(&lang.as_str()) {
                return Err(unknown_language(lang));
            }
        }
        let pattern = Regex::new(&spec.match_pattern).map_err(|e| Error::InvalidOperator {
            id: spec.id.clone(),
            reason: e.to_string(),
        })?;
        Ok(MutationOperator {
            id: spec.id.clone(),
            pattern,
            replacements: spec.replacements.clone(),
            languages: spec.languages.clone(),
            category: spec.category,
        })
    }

    pub fn applies_to(&self, language: &str) -> bool {
        self.languages
            .iter()
            .any(|l| l == language || l == "generic")
    }

    /// Rewrites the first match of the pattern in `line` with replacement
    /// `index`. Returns `None` when the pattern does not match or the
    /// rewrite would leave the line unchanged.
    pub fn rewrite(&self, line: &str, index: usize) -> Option<String> {
        let caps = self.pattern.captures(line)?;
        let whole = caps.get(0)?;
        let template = self.replacements.get(index)?;
        let replaced = expand_template(template, &caps)?;
        let mut out = String::with_capacity(line.len() + replaced.len());
        out.push_str(&line[..whole.start()]);
        out.push_str(&replaced);
        out.push_str(&line[whole.end()..]);
        (out != line).then_some(out)
    }
}

static INT_TOKEN: OnceLock<Regex> = OnceLock::new();

fn expand_template(template: &str, caps: &Captures<'_>) -> Option<String> {
    let token = INT_TOKEN.get_or_init(|| Regex::new(r"#\{(inc|dec):(\d+)\}").unwrap());
    let mut failed = false;
    let resolved = token.replace_all(template, |t: &Captures<'_>| {
        let group: usize = t[2].parse().unwrap_or(usize::MAX);
        let value = caps
            .get(group)
            .and_then(|m| m.as_str().parse::<i128>().ok());
        match value {
            Some(v) => {
                let v = if &t[1] == "inc" { v + 1 } else { v - 1 };
                v.to_string()
            }
            None => {
                failed = true;
                String::new()
            }
        }
    });
    if failed {
        return None;
    }
    let mut out = String::new();
    caps.expand(&resolved, &mut out);
    Some(out)
}

fn unknown_language(tag: &str) -> Error {
    Error::UnknownLanguage {
        tag: tag.to_string(),
        supported: SUPPORTED_LANGUAGES.join(", "),
    }
}

pub fn check_language(tag: &str) -> Result<()> {
    if SUPPORTED_LANGUAGES.contains(&tag) {
        Ok(())
    } else {
        Err(unknown_language(tag))
    }
}

/// Parses a catalog document (`{"operators": [...]}` or a bare array).
pub fn parse_catalog(text: &str) -> Result<Vec<MutationOperator>> {
    let specs: Vec<OperatorSpec> = match serde_json::from_str::<CatalogFile>(text) {
        Ok(file) => file.operators,
        Err(_) => serde_json::from_str(text).map_err(|e| Error::Json {
            path: "<catalog>".into(),
            line: e.line(),
            source: e,
        })?,
    };
    let mut seen = HashSet::new();
    let mut ops = Vec::with_capacity(specs.len());
    for spec in &specs {
        if !seen.insert(spec.id.clone()) {
            return Err(Error::InvalidOperator {
                id: spec.id.clone(),
                reason: "duplicate id".into(),
            });
        }
        ops.push(MutationOperator::compile(spec)?);
    }
    Ok(ops)
}

pub fn builtin_catalog() -> &'static [MutationOperator] {
    static CATALOG: OnceLock<Vec<MutationOperator>> = OnceLock::new();
    CATALOG.get_or_init(|| parse_catalog(BUILTIN_CATALOG).expect("built-in catalog is valid"))
}

/// Operators from the built-in catalog applicable to `language_tag`, in
/// catalog order.
pub fn load_operator_catalog(language_tag: &str) -> Result<Vec<MutationOperator>> {
    check_language(language_tag)?;
    Ok(filter_catalog(builtin_catalog(), language_tag))
}

pub fn load_operator_catalog_file(path: &Path, language_tag: &str) -> Result<Vec<MutationOperator>> {
    check_language(language_tag)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let all = parse_catalog(&text)?;
    Ok(filter_catalog(&all, language_tag))
}

fn filter_catalog(all: &[MutationOperator], language_tag: &str) -> Vec<MutationOperator> {
    all.iter()
        .filter(|op| op.applies_to(language_tag))
        .cloned()
        .collect()
}

/// Line-comment prefixes recognised for a language tag.
pub fn comment_prefixes(language_tag: &str) -> &'static [&'static str] {
    match language_tag {
        "java" | "c" | "cpp" | "go" => &["//"],
        "python" => &["#"],
        _ => &["//", "#", "--"],
    }
}

/// Language tag inferred from a file extension.
pub fn language_for_path(path: &str) -> Option<&'static str> {
    let ext = path.rsplit_once('.').map(|(_, e)| e)?;
    Some(match ext {
        "java" => "java",
        "c" | "h" => "c",
        "cc" | "cpp" | "cxx" | "hpp" | "hh" => "cpp",
        "go" => "go",
        "py" => "python",
        _ => return None,
    })
}

/// Source extensions scanned for a language tag.
pub fn source_extensions(language_tag: &str) -> &'static [&'static str] {
    match language_tag {
        "java" => &["java"],
        "c" => &["c", "h"],
        "cpp" => &["cc", "cpp", "cxx", "hpp", "hh", "h"],
        "go" => &["go"],
        "python" => &["py"],
        _ => &[],
    }
}

/// Exclusions for lines whose mutations mostly touch log output.
pub const LOG_EXCLUSIONS: &[&str] = &[
    r"\blog(ger)?\.",
    r"\b(printf|fprintf|sprintf|println|print)\s*\(",
    r"System\.(out|err)\.",
    r"\bfmt\.(Print|Sprint|Fprint|Errorf)",
    r#"^\s*(raise|throw)\b.*["']"#,
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mutant {
    pub id: String,
    pub path: String,
    pub line: usize,
    pub operator_id: String,
    pub original: String,
    pub mutated: String,
}

impl Mutant {
    pub fn make_id(path: &str, line: usize, operator_id: &str, replacement: usize) -> String {
        format!("{path}:{line}:{operator_id}:{replacement}")
    }
}

impl fmt::Display for Mutant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{} [{}] `{}` -> `{}`",
            self.path,
            self.line,
            self.operator_id,
            self.original.trim(),
            self.mutated.trim()
        )
    }
}

/// Splits text into `(content, terminator)` pairs. Concatenating every pair
/// reproduces the input exactly.
pub(crate) fn split_lines(text: &str) -> Vec<(&str, &str)> {
    let mut out = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        match rest.find('\n') {
            Some(i) => {
                let (line, tail) = rest.split_at(i + 1);
                let content_len = if line.ends_with("\r\n") { i - 1 } else { i };
                out.push((&line[..content_len], &line[content_len..]));
                rest = tail;
            }
            None => {
                out.push((rest, ""));
                rest = "";
            }
        }
    }
    out
}

pub(crate) fn is_comment_only(line: &str, prefixes: &[&str]) -> bool {
    let trimmed = line.trim_start();
    prefixes.iter().any(|p| trimmed.starts_with(p))
}

pub fn compile_exclusions(patterns: &[String]) -> Result<Vec<Regex>> {
    patterns.iter().map(|p| Ok(Regex::new(p)?)).collect()
}

/// Generates every mutant for `source_text`, ordered by line, then catalog
/// order, then replacement index.
pub fn generate_mutants(
    source_text: &str,
    path: &str,
    language_tag: &str,
    operators: &[MutationOperator],
    exclusions: &[Regex],
) -> Vec<Mutant> {
    let prefixes = comment_prefixes(language_tag);
    let mut mutants = Vec::new();
    for (index, (line, _)) in split_lines(source_text).into_iter().enumerate() {
        let line_no = index + 1;
        if line.trim().is_empty()
            || is_comment_only(line, prefixes)
            || exclusions.iter().any(|re| re.is_match(line))
        {
            continue;
        }
        for op in operators {
            for r in 0..op.replacements.len() {
                if let Some(mutated) = op.rewrite(line, r) {
                    mutants.push(Mutant {
                        id: Mutant::make_id(path, line_no, &op.id, r),
                        path: path.to_string(),
                        line: line_no,
                        operator_id: op.id.clone(),
                        original: line.to_string(),
                        mutated,
                    });
                }
            }
        }
    }
    mutants
}

/// Returns `source_text` with line `mutant.line` replaced by the mutated text.
pub fn apply_mutant(source_text: &str, mutant: &Mutant) -> Result<String> {
    replace_line(source_text, mutant.line, &mutant.original, &mutant.mutated).ok_or_else(|| {
        Error::StaleMutant {
            id: mutant.id.clone(),
            line: mutant.line,
        }
    })
}

/// Reverses [`apply_mutant`].
pub fn restore_mutant(mutated_text: &str, mutant: &Mutant) -> Result<String> {
    replace_line(mutated_text, mutant.line, &mutant.mutated, &mutant.original).ok_or_else(|| {
        Error::StaleMutant {
            id: mutant.id.clone(),
            line: mutant.line,
        }
    })
}

fn replace_line(text: &str, line_no: usize, expected: &str, replacement: &str) -> Option<String> {
    let lines = split_lines(text);
    if line_no == 0 || line_no > lines.len() || lines[line_no - 1].0 != expected {
        return None;
    }
    let mut out = String::with_capacity(text.len() + replacement.len());
    for (i, (content, end)) in lines.iter().enumerate() {
        out.push_str(if i + 1 == line_no { replacement } else { content });
        out.push_str(end);
    }
    Some(out)
}
