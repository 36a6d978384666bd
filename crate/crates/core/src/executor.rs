//! Mutant evaluation in isolated project copies.
//!
//! Each worker owns one full copy of the project. A mutant is applied to the
//! copy, the build and test commands run through `sh -c`, and the mutated
//! line is restored before the worker picks up the next mutant. Results are
//! re-sorted into input order, so verdicts do not depend on `jobs`.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Seek, SeekFrom};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::operators::{self, Mutant};

pub const MUTANT_ID_ENV: &str = "ORACLE_GAP_MUTANT_ID";

/// Directory names never copied into workspaces.
pub const DEFAULT_COPY_EXCLUDES: &[&str] = &[".git", "target", "__pycache__", ".oracle-gap"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Killed,
    Survived,
    Timeout,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantOutcome {
    pub mutant_id: String,
    pub verdict: Verdict,
    pub duration_ms: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub test_command: String,
    pub build_command: Option<String>,
    pub timeout_factor: f64,
    /// Lower bound on the per-mutant timeout, so that very fast suites are
    /// not cut off by scheduler noise.
    pub min_timeout_ms: u64,
    pub jobs: usize,
    pub seed: u64,
    pub workspace_root: Option<PathBuf>,
    pub copy_excludes: Vec<String>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            test_command: String::new(),
            build_command: None,
            timeout_factor: 10.0,
            min_timeout_ms: 1000,
            jobs: 1,
            seed: 0,
            workspace_root: None,
            copy_excludes: DEFAULT_COPY_EXCLUDES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.test_command.trim().is_empty() {
            return Err(Error::Config("test_command is required".into()));
        }
        if !(self.timeout_factor > 0.0) || !self.timeout_factor.is_finite() {
            return Err(Error::Config("timeout_factor must be positive".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn timeout_ms(&self, baseline_ms: u64) -> u64 {
        let scaled = (baseline_ms.max(1) as f64 * self.timeout_factor).ceil() as u64;
        scaled.max(self.min_timeout_ms)
    }
}

/// First record of an outcomes file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignHeader {
    pub seed: u64,
    pub timeout_ms: u64,
    pub baseline_ms: u64,
    pub test_command: String,
    pub started_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build_command: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub header: CampaignHeader,
    pub outcomes: Vec<MutantOutcome>,
}

impl CampaignResult {
    pub fn verdicts(&self) -> Vec<Verdict> {
        self.outcomes.iter().map(|o| o.verdict).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        out.push_str(&crate::io::to_jsonl(&self.outcomes));
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_jsonl().as_bytes())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OutcomeLine {
    Header(CampaignHeader),
    Outcome(MutantOutcome),
}

/// Reads an outcomes file. The header is optional so that partial
/// checkpoint files parse too.
pub fn read_outcomes(path: &Path) -> Result<(Option<CampaignHeader>, Vec<MutantOutcome>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut outcomes = Vec::new();
    for line in crate::io::parse_jsonl::<OutcomeLine>(&text, path)? {
        match line {
            OutcomeLine::Header(h) => header = Some(h),
            OutcomeLine::Outcome(o) => outcomes.push(o),
        }
    }
    Ok((header, outcomes))
}

/// A private copy of the project tree, removed on drop.
#[derive(Debug)]
pub struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    pub fn provision(project_root: &Path, config: &CampaignConfig) -> Result<Self> {
        let dir = match &config.workspace_root {
            Some(root) => {
                fs::create_dir_all(root).map_err(|e| Error::Workspace(format!("{}: {e}", root.display())))?;
                tempfile::Builder::new().prefix("og-ws-").tempdir_in(root)
            }
            None => tempfile::Builder::new().prefix("og-ws-").tempdir(),
        }
        .map_err(|e| Error::Workspace(e.to_string()))?;
        copy_tree(project_root, dir.path(), &config.copy_excludes)
            .map_err(|e| Error::Workspace(e.to_string()))?;
        Ok(Workspace { dir })
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}

pub fn copy_tree(src: &Path, dst: &Path, excludes: &[String]) -> Result<()> {
    let src = src.canonicalize().map_err(|e| Error::io(src, e))?;
    let walker = WalkDir::new(&src).follow_links(false).into_iter().filter_entry(|e| {
        e.depth() == 0
            || !excludes
                .iter()
                .any(|x| e.file_name().to_str() == Some(x.as_str()))
    });
    for entry in walker {
        let entry = entry.map_err(|e| Error::Workspace(e.to_string()))?;
        let rel = entry.path().strip_prefix(&src).expect("walk stays under root");
        let target = dst.join(rel);
        let ft = entry.file_type();
        if ft.is_dir() {
            fs::create_dir_all(&target).map_err(|e| Error::io(&target, e))?;
        } else if ft.is_symlink() {
            let link = fs::read_link(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
            std::os::unix::fs::symlink(&link, &target).map_err(|e| Error::io(&target, e))?;
        } else {
            fs::copy(entry.path(), &target).map_err(|e| Error::io(&target, e))?;
        }
    }
    Ok(())
}

#[derive(Debug)]
pub enum CommandStatus {
    Exited(ExitStatus),
    TimedOut,
}

#[derive(Debug)]
pub struct CommandRun {
    pub status: CommandStatus,
    pub elapsed: Duration,
    pub output_tail: String,
}

impl CommandRun {
    pub fn success(&self) -> bool {
        matches!(self.status, CommandStatus::Exited(s) if s.success())
    }

    pub fn describe(&self) -> String {
        match &self.status {
            CommandStatus::TimedOut => "timed out".into(),
            CommandStatus::Exited(s) => match s.code() {
                Some(c) => format!("exit {c}"),
                None => "killed by signal".into(),
            },
        }
    }
}

/// Runs `command` through `sh -c` in its own process group, killing the
/// whole group once `timeout` elapses.
pub fn run_shell(
    command: &str,
    cwd: &Path,
    env: &[(&str, &str)],
    timeout: Option<Duration>,
) -> Result<CommandRun> {
    let mut log = tempfile::tempfile().map_err(|e| Error::io(cwd, e))?;
    let out = log.try_clone().map_err(|e| Error::io(cwd, e))?;
    let err = log.try_clone().map_err(|e| Error::io(cwd, e))?;
    let mut cmd = Command::new("sh");
    cmd.arg("-c")
        .arg(command)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::from(out))
        .stderr(Stdio::from(err))
        .process_group(0);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let start = Instant::now();
    let mut child = cmd.spawn().map_err(|e| Error::io(cwd, e))?;
    let mut pause = Duration::from_millis(1);
    let status = loop {
        if let Some(status) = child.try_wait().map_err(|e| Error::io(cwd, e))? {
            break CommandStatus::Exited(status);
        }
        if timeout.is_some_and(|t| start.elapsed() >= t) {
            // SAFETY: plain syscall on the process group we created.
            unsafe {
                libc::kill(-(child.id() as i32), libc::SIGKILL);
            }
            let _ = child.wait();
            break CommandStatus::TimedOut;
        }
        thread::sleep(pause);
        pause = (pause * 2).min(Duration::from_millis(10));
    };
    let elapsed = start.elapsed();
    let mut text = String::new();
    let len = log.seek(SeekFrom::End(0)).unwrap_or(0);
    let _ = log.seek(SeekFrom::Start(len.saturating_sub(2048)));
    let _ = log.read_to_string(&mut text);
    let output_tail = text
        .lines()
        .rev()
        .filter(|l| !l.trim().is_empty())
        .take(5)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect::<Vec<_>>()
        .join(" | ");
    Ok(CommandRun {
        status,
        elapsed,
        output_tail,
    })
}

fn ms(d: Duration) -> u64 {
    d.as_millis().min(u64::MAX as u128) as u64
}

/// Runs build and tests once on an unmutated copy and returns the elapsed
/// wall-clock time in milliseconds.
pub fn baseline_check(project_root: &Path, config: &CampaignConfig) -> Result<u64> {
    config.validate()?;
    let ws = Workspace::provision(project_root, config)?;
    baseline_in(ws.path(), config)
}

/// [`baseline_check`] inside an already provisioned directory.
pub fn baseline_in(dir: &Path, config: &CampaignConfig) -> Result<u64> {
    let start = Instant::now();
    if let Some(build) = &config.build_command {
        let run = run_shell(build, dir, &[], None)?;
        if !run.success() {
            return Err(Error::RedBaseline(format!(
                "build command failed ({}): {}",
                run.describe(),
                run.output_tail
            )));
        }
    }
    let run = run_shell(&config.test_command, dir, &[], None)?;
    if !run.success() {
        return Err(Error::RedBaseline(format!(
            "test command failed ({}): {}",
            run.describe(),
            run.output_tail
        )));
    }
    Ok(ms(start.elapsed()).max(1))
}

/// Applies `mutant` inside `workspace`, runs build and tests, classifies the
/// result and restores the file.
pub fn evaluate_mutant(
    workspace: &Path,
    mutant: &Mutant,
    config: &CampaignConfig,
    timeout_ms: u64,
) -> MutantOutcome {
    let start = Instant::now();
    let outcome = |verdict, detail: String| MutantOutcome {
        mutant_id: mutant.id.clone(),
        verdict,
        duration_ms: ms(start.elapsed()).min(if verdict == Verdict::Timeout {
            u64::MAX
        } else {
            timeout_ms
        }),
        detail,
    };
    let file = workspace.join(&mutant.path);
    let original = match fs::read_to_string(&file) {
        Ok(t) => t,
        Err(e) => return outcome(Verdict::Invalid, format!("stale: {e}")),
    };
    let mutated = match operators::apply_mutant(&original, mutant) {
        Ok(t) => t,
        Err(_) => return outcome(Verdict::Invalid, "stale".into()),
    };
    if let Err(e) = fs::write(&file, &mutated) {
        return outcome(Verdict::Invalid, format!("write failed: {e}"));
    }
    let verdict = run_mutated(workspace, mutant, config, timeout_ms, start);
    if let Err(e) = fs::write(&file, &original) {
        log::error!("failed to restore {}: {e}", file.display());
    }
    let (v, d) = verdict;
    outcome(v, d)
}

fn run_mutated(
    workspace: &Path,
    mutant: &Mutant,
    config: &CampaignConfig,
    timeout_ms: u64,
    start: Instant,
) -> (Verdict, String) {
    let budget = Duration::from_millis(timeout_ms);
    let env = [(MUTANT_ID_ENV, mutant.id.as_str())];
    if let Some(build) = &config.build_command {
        match run_shell(build, workspace, &env, Some(budget)) {
            Ok(run) if run.success() => {}
            Ok(run) => {
                return (
                    Verdict::Invalid,
                    format!("build failed ({}): {}", run.describe(), run.output_tail),
                )
            }
            Err(e) => return (Verdict::Invalid, format!("build error: {e}")),
        }
    }
    let remaining = budget.saturating_sub(start.elapsed());
    match run_shell(&config.test_command, workspace, &env, Some(remaining)) {
        Ok(run) => match run.status {
            CommandStatus::TimedOut => (Verdict::Timeout, format!("timeout after {timeout_ms} ms")),
            CommandStatus::Exited(s) if s.success() => (Verdict::Survived, "exit 0".into()),
            CommandStatus::Exited(_) => (Verdict::Killed, run.describe()),
        },
        Err(e) => (Verdict::Invalid, format!("test error: {e}")),
    }
}

pub fn campaign_header(config: &CampaignConfig, baseline_ms: u64) -> CampaignHeader {
    CampaignHeader {
        seed: config.seed,
        timeout_ms: config.timeout_ms(baseline_ms),
        baseline_ms,
        test_command: config.test_command.clone(),
        started_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        build_command: config.build_command.clone(),
    }
}

/// Baseline check followed by evaluation of every mutant.
pub fn run_campaign(project_root: &Path, mutants: &[Mutant], config: &CampaignConfig) -> Result<CampaignResult> {
    let baseline_ms = baseline_check(project_root, config)?;
    let header = campaign_header(config, baseline_ms);
    let outcomes = evaluate_all(project_root, mutants, config, header.timeout_ms, &HashMap::new(), |_| {})?;
    Ok(CampaignResult { header, outcomes })
}

/// Evaluates `mutants` with up to `config.jobs` workers. Mutants whose id is
/// in `done` are not re-run; their stored outcome is reused. `on_outcome` is
/// called for each fresh outcome as it completes. Output is in input order.
pub fn evaluate_all(
    project_root: &Path,
    mutants: &[Mutant],
    config: &CampaignConfig,
    timeout_ms: u64,
    done: &HashMap<String, MutantOutcome>,
    on_outcome: impl Fn(&MutantOutcome) + Sync,
) -> Result<Vec<MutantOutcome>> {
    config.validate()?;
    let pending: Vec<usize> = (0..mutants.len())
        .filter(|&i| !done.contains_key(&mutants[i].id))
        .collect();
    let mut slots: Vec<Option<MutantOutcome>> = mutants.iter().map(|m| done.get(&m.id).cloned()).collect();
    if !pending.is_empty() {
        let workers = config.jobs.min(pending.len());
        let workspaces = (0..workers)
            .map(|_| Workspace::provision(project_root, config))
            .collect::<Result<Vec<_>>>()?;
        let next = AtomicUsize::new(0);
        let results = Mutex::new(Vec::with_capacity(pending.len()));
        let total = pending.len();
        thread::scope(|scope| {
            for ws in &workspaces {
                let (next, results, pending, on_outcome) = (&next, &results, &pending, &on_outcome);
                scope.spawn(move || loop {
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&idx) = pending.get(k) else { break };
                    let o = evaluate_mutant(ws.path(), &mutants[idx], config, timeout_ms);
                    log::debug!("[{}/{}] {} {:?}", k + 1, total, o.mutant_id, o.verdict);
                    on_outcome(&o);
                    results.lock().expect("results lock").push((idx, o));
                });
            }
        });
        for (idx, o) in results.into_inner().expect("results lock") {
            slots[idx] = Some(o);
        }
    }
    Ok(slots
        .into_iter()
        .map(|s| s.expect("every mutant evaluated"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn project(files: &[(&str, &str)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, text) in files {
            let p = dir.path().join(name);
            fs::create_dir_all(p.parent().unwrap()).unwrap();
            fs::write(p, text).unwrap();
        }
        dir
    }

    fn config(test: &str) -> CampaignConfig {
        CampaignConfig {
            test_command: test.into(),
            min_timeout_ms: 500,
            ..Default::default()
        }
    }

    fn mutant(line: usize, original: &str, mutated: &str) -> Mutant {
        Mutant {
            id: format!("v.txt:{line}:t:0"),
            path: "v.txt".into(),
            line,
            operator_id: "t".into(),
            original: original.into(),
            mutated: mutated.into(),
        }
    }

    // The "suite" passes iff v.txt line 1 is `ok`.
    const CHECK: &str = "grep -qx ok v.txt";

    #[test]
    fn verdicts_by_exit_status() {
        let p = project(&[("v.txt", "ok\nother\n")]);
        let ws = Workspace::provision(p.path(), &config(CHECK)).unwrap();
        let cfg = config(CHECK);
        let killed = evaluate_mutant(ws.path(), &mutant(1, "ok", "bad"), &cfg, 5000);
        assert_eq!(killed.verdict, Verdict::Killed);
        let survived = evaluate_mutant(ws.path(), &mutant(2, "other", "else"), &cfg, 5000);
        assert_eq!(survived.verdict, Verdict::Survived);
        let stale = evaluate_mutant(ws.path(), &mutant(2, "nope", "x"), &cfg, 5000);
        assert_eq!((stale.verdict, stale.detail.as_str()), (Verdict::Invalid, "stale"));
        assert_eq!(fs::read_to_string(ws.path().join("v.txt")).unwrap(), "ok\nother\n");
        assert_eq!(fs::read_to_string(p.path().join("v.txt")).unwrap(), "ok\nother\n");
    }

    #[test]
    fn build_failure_is_invalid_and_hang_is_timeout() {
        let p = project(&[("v.txt", "ok\nsleep 0\n")]);
        let mut cfg = config("sh -c \"$(sed -n 2p v.txt)\"");
        cfg.build_command = Some("! grep -q broken v.txt".into());
        let ws = Workspace::provision(p.path(), &cfg).unwrap();
        let inv = evaluate_mutant(ws.path(), &mutant(1, "ok", "broken"), &cfg, 5000);
        assert_eq!(inv.verdict, Verdict::Invalid);
        let start = Instant::now();
        let to = evaluate_mutant(ws.path(), &mutant(2, "sleep 0", "sleep 30"), &cfg, 300);
        assert_eq!(to.verdict, Verdict::Timeout);
        assert!(to.duration_ms >= 300);
        assert!(start.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn red_baseline_is_rejected() {
        let p = project(&[("v.txt", "bad\n")]);
        assert!(matches!(baseline_check(p.path(), &config(CHECK)), Err(Error::RedBaseline(_))));
        let good = project(&[("v.txt", "ok\n")]);
        let mut cfg = config(CHECK);
        cfg.build_command = Some("exit 4".into());
        match baseline_check(good.path(), &cfg) {
            Err(Error::RedBaseline(msg)) => assert!(msg.contains("build"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(baseline_check(good.path(), &config(CHECK)).unwrap() > 0);
    }

    #[test]
    fn mutant_id_exported_to_commands() {
        let p = project(&[("v.txt", "ok\n")]);
        let cfg = config("test \"$ORACLE_GAP_MUTANT_ID\" = v.txt:1:t:0 && exit 1; exit 0");
        let ws = Workspace::provision(p.path(), &cfg).unwrap();
        let o = evaluate_mutant(ws.path(), &mutant(1, "ok", "ok2"), &cfg, 5000);
        assert_eq!(o.verdict, Verdict::Killed);
    }

    #[test]
    fn campaign_order_independent_of_jobs() {
        let p = project(&[("v.txt", "ok\na\nb\nc\nd\ne\n")]);
        let mut ms = vec![mutant(1, "ok", "no")];
        for (i, c) in ["a", "b", "c", "d", "e"].iter().enumerate() {
            ms.push(mutant(i + 2, c, "z"));
        }
        ms.push(mutant(1, "ok", "nope"));
        let mut cfg = config(CHECK);
        let one = run_campaign(p.path(), &ms, &cfg).unwrap();
        cfg.jobs = 4;
        let four = run_campaign(p.path(), &ms, &cfg).unwrap();
        assert_eq!(one.verdicts(), four.verdicts());
        let ids: Vec<_> = four.outcomes.iter().map(|o| o.mutant_id.clone()).collect();
        assert_eq!(ids, ms.iter().map(|m| m.id.clone()).collect::<Vec<_>>());
        assert_eq!(one.verdicts()[0], Verdict::Killed);
        assert_eq!(one.verdicts()[1], Verdict::Survived);
        assert!(run_campaign(p.path(), &[], &cfg).unwrap().outcomes.is_empty());
    }

    #[test]
    fn resumed_outcomes_are_reused() {
        let p = project(&[("v.txt", "ok\na\n")]);
        let ms = vec![mutant(1, "ok", "no"), mutant(2, "a", "b")];
        let mut done = HashMap::new();
        done.insert(
            ms[0].id.clone(),
            MutantOutcome {
                mutant_id: ms[0].id.clone(),
                verdict: Verdict::Survived,
                duration_ms: 1,
                detail: "prior".into(),
            },
        );
        let calls = AtomicUsize::new(0);
        let out = evaluate_all(p.path(), &ms, &config(CHECK), 5000, &done, |_| {
            calls.fetch_add(1, Ordering::SeqCst);
        })
        .unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert_eq!(out[0].detail, "prior");
        assert_eq!(out[1].verdict, Verdict::Survived);
    }

    #[test]
    fn outcomes_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let result = CampaignResult {
            header: CampaignHeader {
                seed: 7,
                timeout_ms: 1000,
                baseline_ms: 20,
                test_command: "true".into(),
                started_at: "2024-01-01T00:00:00Z".into(),
                build_command: None,
            },
            outcomes: vec![MutantOutcome {
                mutant_id: "a:1:x:0".into(),
                verdict: Verdict::Timeout,
                duration_ms: 1000,
                detail: "timeout".into(),
            }],
        };
        let path = dir.path().join("outcomes.jsonl");
        result.write(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("\"verdict\":\"TIMEOUT\""));
        let (h, os) = read_outcomes(&path).unwrap();
        assert_eq!(h.unwrap(), result.header);
        assert_eq!(os, result.outcomes);
    }

    #[test]
    fn timeout_scaling() {
        let mut cfg = config("true");
        cfg.min_timeout_ms = 0;
        assert_eq!(cfg.timeout_ms(120), 1200);
        cfg.min_timeout_ms = 2000;
        assert_eq!(cfg.timeout_ms(120), 2000);
        cfg.timeout_factor = 0.0;
        assert!(cfg.validate().is_err());
    }
}
