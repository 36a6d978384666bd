//! Run configuration: a flat `key = value` file (TOML) overlaid by flags.
//!
//! ```toml
//! project_root = "."
//! language = "python"
//! coverage_report = "lcov.info"
//! test_command = "python3 -B test_calc.py"
//! build_command = "python3 -B check_syntax.py"
//! seed = 7
//! jobs = 4
//! ```
//!
//! Relative paths in the file resolve against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ablation;
use crate::error::{Error, Result};
use crate::executor::{CampaignConfig, DEFAULT_COPY_EXCLUDES};
use crate::metrics::ScoreOptions;
use crate::operators;
use crate::report::{ScoreScope, SuspectRule};
use crate::sampling::BucketPlan;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub project_root: Option<PathBuf>,
    pub language: Option<String>,
    pub coverage_report: Option<PathBuf>,
    pub test_command: Option<String>,
    pub build_command: Option<String>,
    pub coverage_command: Option<String>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub timeout_factor: Option<f64>,
    pub min_timeout_ms: Option<u64>,
    pub mutant_cap: Option<usize>,
    pub files_per_bucket: Option<usize>,
    pub file_cap: Option<usize>,
    #[serde(default)]
    pub exclusion_patterns: Vec<String>,
    pub exclude_logging: Option<bool>,
    pub catalog: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub timeout_as_kill: Option<bool>,
    pub suspect_min_coverage: Option<f64>,
    pub suspect_max_score: Option<f64>,
    pub suspect_scope: Option<ScoreScope>,
    pub workspace_root: Option<PathBuf>,
    #[serde(default)]
    pub copy_excludes: Vec<String>,
    /// Test files whose assertions and test cases may be knocked out.
    #[serde(default)]
    pub test_files: Vec<String>,
    /// Files measured by ablation; defaults to every file with mutants.
    #[serde(default)]
    pub target_files: Vec<String>,
    #[serde(default)]
    pub assert_patterns: Vec<String>,
    #[serde(default)]
    pub test_patterns: Vec<String>,
    /// Test cases whose anchor line matches one of these are never knocked
    /// out (e.g. integration or exception tests).
    #[serde(default)]
    pub keep_test_patterns: Vec<String>,
    pub samples: Option<usize>,
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        rebase(base, &mut cfg.project_root);
        rebase(base, &mut cfg.coverage_report);
        rebase(base, &mut cfg.catalog);
        rebase(base, &mut cfg.output_dir);
        rebase(base, &mut cfg.workspace_root);
        if cfg.project_root.is_none() {
            cfg.project_root = Some(base.to_path_buf());
        }
        Ok(cfg)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(mut self, over: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$( if over.$f.is_some() { self.$f = over.$f; } )*};
        }
        macro_rules! take_vec {
            ($($f:ident),*) => {$( if !over.$f.is_empty() { self.$f = over.$f; } )*};
        }
        take!(
            project_root, language, coverage_report, test_command, build_command, coverage_command, seed, jobs,
            timeout_factor, min_timeout_ms, mutant_cap, files_per_bucket, file_cap, exclude_logging, catalog,
            output_dir, timeout_as_kill, suspect_min_coverage, suspect_max_score, suspect_scope, workspace_root,
            samples
        );
        take_vec!(
            exclusion_patterns, copy_excludes, test_files, target_files, assert_patterns, test_patterns,
            keep_test_patterns
        );
        self
    }

    pub fn project_root(&self) -> PathBuf {
        self.project_root.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn language(&self) -> Result<String> {
        let tag = self.language.clone().unwrap_or_else(|| "generic".into());
        operators::check_language(&tag)?;
        Ok(tag)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| self.project_root().join("oracle-gap-out"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn plan(&self) -> BucketPlan {
        let d = BucketPlan::default();
        BucketPlan {
            per_bucket: self.files_per_bucket.unwrap_or(d.per_bucket),
            mutant_cap: self.mutant_cap.unwrap_or(d.mutant_cap),
            file_cap: self.file_cap.unwrap_or(d.file_cap),
            seed: self.seed(),
        }
    }

    pub fn exclusions(&self) -> Vec<String> {
        let mut out = self.exclusion_patterns.clone();
        if self.exclude_logging.unwrap_or(false) {
            out.extend(operators::LOG_EXCLUSIONS.iter().map(|s| s.to_string()));
        }
        out
    }

    pub fn campaign(&self) -> Result<CampaignConfig> {
        let d = CampaignConfig::default();
        let mut copy_excludes: Vec<String> = DEFAULT_COPY_EXCLUDES.iter().map(|s| s.to_string()).collect();
        copy_excludes.extend(self.copy_excludes.iter().cloned());
        if let Some(name) = self.output_dir().file_name().and_then(|n| n.to_str()) {
            copy_excludes.push(name.to_string());
        }
        let cfg = CampaignConfig {
            test_command: self
                .test_command
                .clone()
                .ok_or_else(|| Error::Config("test_command is required".into()))?,
            build_command: self.build_command.clone(),
            timeout_factor: self.timeout_factor.unwrap_or(d.timeout_factor),
            min_timeout_ms: self.min_timeout_ms.unwrap_or(d.min_timeout_ms),
            jobs: self.jobs.unwrap_or(d.jobs),
            seed: self.seed(),
            workspace_root: self.workspace_root.clone(),
            copy_excludes,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scoring(&self) -> ScoreOptions {
        ScoreOptions {
            timeout_as_kill: self.timeout_as_kill.unwrap_or(true),
        }
    }

    pub fn suspect_rule(&self) -> Result<SuspectRule> {
        let d = SuspectRule::default();
        let rule = SuspectRule {
            min_coverage: self.suspect_min_coverage.unwrap_or(d.min_coverage),
            max_mutation_score: self.suspect_max_score.unwrap_or(d.max_mutation_score),
            scope: self.suspect_scope.unwrap_or(d.scope),
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn assert_patterns(&self) -> Vec<String> {
        if self.assert_patterns.is_empty() {
            ablation::default_assert_patterns()
        } else {
            self.assert_patterns.clone()
        }
    }

    pub fn test_patterns(&self) -> Vec<String> {
        if self.test_patterns.is_empty() {
            ablation::default_test_patterns()
        } else {
            self.test_patterns.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_overlay() {
        let file = RunConfig::parse(
            "language = \"python\"\ntest_command = \"true\"\nseed = 3\njobs = 2\nexclusion_patterns = [\"x\"]\n",
        )
        .unwrap();
        let flags = RunConfig {
            jobs: Some(4),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.jobs, Some(4));
        assert_eq!(merged.seed(), 3);
        assert_eq!(merged.exclusion_patterns, vec!["x"]);
        assert_eq!(merged.plan().seed, 3);
        assert_eq!(merged.campaign().unwrap().jobs, 4);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("colour = 1\n").is_err());
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("og.toml");
        std::fs::write(&path, "coverage_report = \"lcov.info\"\ntest_command = \"true\"\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.coverage_report.unwrap(), dir.path().join("lcov.info"));
        assert_eq!(cfg.project_root.unwrap(), dir.path());
    }

    #[test]
    fn logging_exclusions_are_opt_in() {
        let mut cfg = RunConfig::default();
        assert!(cfg.exclusions().is_empty());
        cfg.exclude_logging = Some(true);
        assert_eq!(cfg.exclusions().len(), operators::LOG_EXCLUSIONS.len());
    }

    #[test]
    fn missing_test_command_and_bad_suspect_rule() {
        assert!(RunConfig::default().campaign().is_err());
        let cfg = RunConfig {
            suspect_min_coverage: Some(0.1),
            suspect_max_score: Some(0.5),
            ..Default::default()
        };
        assert!(cfg.suspect_rule().is_err());
        assert!(RunConfig { language: Some("klingon".into()), ..Default::default() }.language().is_err());
    }
}
