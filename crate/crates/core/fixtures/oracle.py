"""Independent oracle for fixture expectations.

For every mutant in <fixture>/expected/mutants.jsonl, copies the fixture to
a fresh directory, rewrites the one line, and runs the build and test
commands one at a time. Verdicts go to expected/outcomes.jsonl; the gap
report recomputed from them and from lcov.info goes to expected/gap.json.

usage: python3 oracle.py <fixture-dir> [<fixture-dir> ...]
"""
import json
import os
import shutil
import signal
import subprocess
import sys
import tempfile
from fractions import Fraction

import toml

TIMEOUT_S = 3.0
SKIP = {"expected", "out", "__pycache__", ".git"}


def run(cmd, cwd, env, timeout):
    p = subprocess.Popen(cmd, shell=True, cwd=cwd, env=env, stdout=subprocess.DEVNULL,
                         stderr=subprocess.DEVNULL, start_new_session=True)
    try:
        return p.wait(timeout=timeout)
    except subprocess.TimeoutExpired:
        os.killpg(p.pid, signal.SIGKILL)
        p.wait()
        return None


def verdict(fixture, cfg, mutant):
    with tempfile.TemporaryDirectory() as tmp:
        work = os.path.join(tmp, "w")
        shutil.copytree(fixture, work, ignore=lambda d, names: [n for n in names if n in SKIP])
        target = os.path.join(work, mutant["path"])
        with open(target, newline="") as f:
            lines = f.read().splitlines(keepends=True)
        line = lines[mutant["line"] - 1]
        body = line.rstrip("\r\n")
        if body != mutant["original"]:
            return "INVALID", "stale"
        lines[mutant["line"] - 1] = mutant["mutated"] + line[len(body):]
        with open(target, "w", newline="") as f:
            f.write("".join(lines))
        env = dict(os.environ, ORACLE_GAP_MUTANT_ID=mutant["id"])
        if cfg.get("build_command"):
            if run(cfg["build_command"], work, env, 60) != 0:
                return "INVALID", "build failed"
        code = run(cfg["test_command"], work, env, TIMEOUT_S)
        if code is None:
            return "TIMEOUT", "timeout"
        return ("KILLED", "exit %d" % code) if code != 0 else ("SURVIVED", "exit 0")


def read_lcov(path):
    cov = {}
    current = None
    with open(path) as f:
        for raw in f:
            line = raw.strip()
            if line.startswith("SF:"):
                current = cov.setdefault(os.path.normpath(line[3:]), {})
            elif line.startswith("DA:"):
                n, hits = line[3:].split(",")[:2]
                current[int(n)] = current.get(int(n), 0) + int(hits)
            elif line == "end_of_record":
                current = None
    return cov


def fl(x):
    return None if x is None else float(x)


def file_report(path, lines, mutants, outcomes, timeout_kills=True):
    detected = {"KILLED"} | ({"TIMEOUT"} if timeout_kills else set())
    mine = [m for m in mutants if m["path"] == path]
    covered = {n for n, h in (lines or {}).items() if h > 0}
    valid = [m for m in mine if outcomes[m["id"]] != "INVALID"]
    killed = [m for m in valid if outcomes[m["id"]] in detected]
    on_cov = [m for m in valid if m["line"] in covered]
    killed_cov = [m for m in on_cov if outcomes[m["id"]] in detected]
    instrumented = len(lines or {})
    cov = Fraction(len(covered), instrumented) if instrumented else None
    score = Fraction(len(killed), len(valid)) if valid else None
    cscore = Fraction(len(killed_cov), len(on_cov)) if on_cov and cov is not None else None
    return {
        "path": path,
        "coverage": fl(cov),
        "mutants_total": len(mine),
        "mutants_valid": len(valid),
        "mutants_on_covered_lines": len(on_cov),
        "killed": len(killed),
        "killed_on_covered_lines": len(killed_cov),
        "mutation_score": fl(score),
        "covered_mutation_score": fl(cscore),
        "raw_gap": fl(100 * (cov - score)) if cov is not None and score is not None else None,
        "covered_gap": fl(100 * (cov - cscore)) if cov is not None and cscore is not None else None,
        "covered_lines": len(covered) if instrumented else 0,
        "instrumented_lines": instrumented,
    }


def project(files):
    have = [f for f in files if f["instrumented_lines"] > 0]
    s = lambda k: sum(f[k] for f in have)
    cov = Fraction(s("covered_lines"), s("instrumented_lines")) if s("instrumented_lines") else None
    score = Fraction(s("killed"), s("mutants_valid")) if s("mutants_valid") else None
    cscore = Fraction(s("killed_on_covered_lines"), s("mutants_on_covered_lines")) if s("mutants_on_covered_lines") else None
    return {
        "files_analyzed": len(have),
        "files_without_coverage": [f["path"] for f in files if f["instrumented_lines"] == 0],
        "covered_lines": s("covered_lines"),
        "instrumented_lines": s("instrumented_lines"),
        "coverage": fl(cov),
        "mutants_total": s("mutants_total"),
        "mutants_valid": s("mutants_valid"),
        "mutants_on_covered_lines": s("mutants_on_covered_lines"),
        "killed": s("killed"),
        "killed_on_covered_lines": s("killed_on_covered_lines"),
        "mutation_score": fl(score),
        "covered_mutation_score": fl(cscore),
        "raw_gap": fl(100 * (cov - score)) if cov is not None and score is not None else None,
        "covered_gap": fl(100 * (cov - cscore)) if cov is not None and cscore is not None else None,
        "files": files,
    }


def main(fixture):
    cfg = toml.load(os.path.join(fixture, "oracle-gap.toml"))
    exp = os.path.join(fixture, "expected")
    with open(os.path.join(exp, "mutants.jsonl")) as f:
        mutants = [json.loads(l) for l in f if l.strip()]
    with open(os.path.join(exp, "manifest.json")) as f:
        manifest = json.load(f)

    if run(cfg["test_command"], fixture, dict(os.environ), 60) != 0:
        sys.exit("%s: baseline is red" % fixture)
    outcomes = {}
    records = []
    for m in mutants:
        v, detail = verdict(fixture, cfg, m)
        outcomes[m["id"]] = v
        records.append({"mutant_id": m["id"], "verdict": v, "duration_ms": 0, "detail": detail})
        print(m["id"], v, file=sys.stderr)
    header = {
        "seed": cfg.get("seed", 0),
        "timeout_ms": int(TIMEOUT_S * 1000),
        "baseline_ms": 0,
        "test_command": cfg["test_command"],
        "started_at": "1970-01-01T00:00:00Z",
    }
    if cfg.get("build_command"):
        header["build_command"] = cfg["build_command"]
    with open(os.path.join(exp, "outcomes.jsonl"), "w") as f:
        for r in [header] + records:
            f.write(json.dumps(r, separators=(",", ":")) + "\n")

    cov = read_lcov(os.path.join(fixture, cfg["coverage_report"]))
    paths = sorted({m["path"] for m in mutants} | {p for v in manifest["selected_files"].values() for p in v})
    files = [file_report(p, cov.get(p), mutants, outcomes) for p in paths]
    min_cov = cfg.get("suspect_min_coverage", 0.8)
    max_score = cfg.get("suspect_max_score", 0.2)
    suspects = [
        {"path": f["path"], "coverage": f["coverage"], "mutation_score": f["mutation_score"], "scope": "raw"}
        for f in files
        if f["coverage"] is not None and f["mutation_score"] is not None
        and f["coverage"] > min_cov and f["mutation_score"] < max_score
    ]
    doc = {
        "scoring": {"timeout_as_kill": True},
        "suspect_rule": {"min_coverage": min_cov, "max_mutation_score": max_score, "scope": "raw"},
        "suspects": suspects,
    }
    doc.update(project(files))
    with open(os.path.join(exp, "gap.json"), "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    for d in sys.argv[1:]:
        main(d)
