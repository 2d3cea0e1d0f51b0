"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the per-criterion
lines are repeated in the terminal summary.
"""

from __future__ import annotations

import dataclasses
import json
import random
import shutil
import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import pytest

from anchorgate.anchors import mine_anchors, process_migration
from anchorgate.frontend import diff_text
from anchorgate.gate import GateConfig, GateContext, check_diff_budget, check_safety
from anchorgate.generator import Scenario, ScriptedGenerator
from anchorgate.metrics import summarize
from anchorgate.model import (
    Anchor,
    AnchorType,
    Category,
    ChainStatus,
    CodeSnapshot,
    Decision,
    DiffStats,
    FailureType,
    GateVerdict,
    LockLevel,
    MigrationRequest,
    Mode,
    Outcome,
    RefinementTask,
    RiskProfile,
    Scope,
    SecuritySpec,
    Severity,
    SeverityCounts,
    Strategy,
)
from anchorgate.orchestrator import ChainInputs, RunConfig, bundled_corpus, discover, run_ablation, run_chain, run_suite
from anchorgate.sast import BuiltinAnalyzer, ExternalAnalyzer, analyze, compute_rho, compute_risk

from conftest import ACCEPTANCE_KEY
from metric_oracle import agree, build_all, oracle, random_chain_set

FE = (Strategy.FEATURE_ENHANCEMENT,)


@pytest.fixture
def report(request):
    """Record and print the outcome line of one criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def emit(number: int, title: str, ok: bool | None, detail: str = "") -> None:
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        line = f"criterion {number} {status}: {title}" + (f" ({detail})" if detail else "")
        lines.append(line)
        print(line)

    return emit


# ---------------------------------------------------------------------------
# 1. gate guarantee under fuzzing
# ---------------------------------------------------------------------------

SNIPPETS = {
    "sql": 'def find_{n}(conn, name):\n    return conn.execute("SELECT * FROM t WHERE n = \'" + name + "\'")\n',
    "pickle": "def load_{n}(blob):\n    return pickle.loads(blob)\n",
    "eval": "def calc_{n}(expr):\n    return eval(expr)\n",
    "shell": 'def run_{n}(arg):\n    return os.system("ls " + arg)\n',
    "md5": "def digest_{n}(data):\n    return hashlib.md5(data).hexdigest()\n",
    "clean": "def add_{n}(a, b):\n    return a + b\n",
    "param": 'def get_{n}(conn, name):\n    return conn.execute("SELECT * FROM t WHERE n = ?", (name,))\n',
}
HEADER = "import hashlib\nimport os\nimport pickle\n\n\n"


def _program(rng: random.Random) -> str:
    kinds = rng.choices(list(SNIPPETS), weights=[2, 1, 1, 1, 1, 4, 3], k=rng.randint(1, 6))
    return HEADER + "\n\n".join(SNIPPETS[k].format(n=i) for i, k in enumerate(kinds))


def _fuzz_scenario(rng: random.Random, iterations: int, r_max: int) -> Scenario:
    steps = {i: {"candidates": [_program(rng) for _ in range(r_max)]} for i in range(1, iterations + 1)}
    return Scenario.from_dict({"iterations": steps})


def _v_ch(source: str) -> int:
    return analyze(CodeSnapshot(source), BuiltinAnalyzer())[1].counts.ch_total


def test_gate_guarantee_fuzz(report):
    cfg = RunConfig(mode=Mode.POST_HOC_SAST, gate=GateConfig(delta_max=0), reviewer="none")
    rng = random.Random(20240611)
    violations, steps, rejected, decreases, incomplete = 0, 0, 0, 0, 0
    start = time.perf_counter()
    for n in range(100):
        iterations = rng.randint(2, 6)
        baseline = CodeSnapshot(_program(rng))
        tasks = [RefinementTask(f"fuzz task {i}", Strategy.FEATURE_ENHANCEMENT, Category.DATABASE)
                 for i in range(iterations)]
        inputs = ChainInputs(
            chain_id=f"fuzz-{n}",
            baseline=baseline,
            tasks=tasks,
            category=Category.DATABASE,
            generator=ScriptedGenerator(_fuzz_scenario(rng, iterations, cfg.gate.r_max)),
            gate=GateContext(),
            check_baseline=False,
        )
        chain = run_chain(inputs, cfg)
        incomplete += chain.status is not ChainStatus.COMPLETE
        # recount every committed state from source instead of trusting the record
        series = [_v_ch(baseline.source)] + [_v_ch(it.committed_snapshot.source) for it in chain.committed_iterations]
        assert series == chain.committed_series(Scope.CRITICAL_HIGH)
        for before, after in zip(series, series[1:]):
            steps += 1
            violations += after > before
            decreases += after < before
        rejected += sum(not a.accepted for it in chain.iterations for a in it.attempts)
    elapsed = time.perf_counter() - start
    ok = violations == 0 and incomplete == 0 and elapsed < 60.0
    detail = f"{steps} committed steps, {violations} violations, {rejected} rejected attempts, {elapsed:.1f}s"
    report(1, "gate guarantee over 100 fuzzed chains", ok, detail)
    assert ok, detail
    # the fuzz must exercise both directions, otherwise it proves nothing
    assert rejected > 100 and decreases > 10 and steps > 100


# ---------------------------------------------------------------------------
# 2. blind-spot fixtures
# ---------------------------------------------------------------------------

# sample -> (anchor expected to block, its selector, text only the degraded program has, text the repair keeps)
BLIND_SPOT_CASES = {
    "case1-validation-deletion": (AnchorType.FUNCTION_SIGNATURE, "validate_user_input(name)",
                                  None, "def validate_user_input(name):"),
    "case2-exception-weakening": (AnchorType.REGEX, r"except\s+\(OSError,\s+json\.JSONDecodeError\)\s+as\s+exc:",
                                  "    except:\n        pass\n", "except (OSError, json.JSONDecodeError) as exc:"),
    "case3-permission-bypass": (AnchorType.INVARIANT, "auth-permission-before-sensitive",
                                "def admin_shortcut(directory, name):", "def admin_shortcut(directory, actor, name):"),
}


def _blind_spot_corpus(tmp_path: Path) -> Path:
    corpus = tmp_path / "blind-spots"
    for name in BLIND_SPOT_CASES:
        shutil.copytree(bundled_corpus("adversarial") / name, corpus / name)
    return corpus


def test_blind_spot_cases(tmp_path, report):
    corpus = _blind_spot_corpus(tmp_path)
    posthoc = {r.chain_id.split(":")[0]: r for r in run_suite(corpus, FE, RunConfig(mode=Mode.POST_HOC_SAST)).records}
    full = {r.chain_id.split(":")[0]: r for r in run_suite(corpus, FE, RunConfig(mode=Mode.FULL)).records}
    problems = []
    for name, (anchor_type, selector, degraded, kept) in BLIND_SPOT_CASES.items():
        # (a) the scanner alone sees nothing new and the degradation commits
        it = posthoc[name].iterations[0]
        (only,) = it.attempts
        source = it.committed_snapshot.source if it.committed_snapshot else ""
        landed = degraded in source if degraded else kept not in source
        if not (only.accepted and only.report.new_findings == () and it.outcome is Outcome.COMMITTED and landed):
            problems.append(f"{name}: post-hoc scan did not commit the degradation")
        # (b) the full framework rejects the degraded candidate through the expected anchor
        first = full[name].iterations[0].attempts[0]
        blocking = [(c.anchor_type, c.selector) for c in first.report.anchor_checks if c.verdict.blocking]
        if (first.accepted or first.report.failed_layer != "anchor_integrity"
                or first.report.safety is not GateVerdict.PASS or first.report.decision is not Decision.RETRY
                or (anchor_type, selector) not in blocking
                or first.counterexample.failure_type is not FailureType.ANCHOR_VIOLATION):
            problems.append(f"{name}: full mode verdict {first.report.failed_layer} {blocking}")
        if name != "case1-validation-deletion" and len(blocking) != 1:
            problems.append(f"{name}: unexpected extra anchors {blocking}")
        final = full[name].final_snapshot.source
        if kept not in final or (degraded and degraded in final):
            problems.append(f"{name}: protected element missing from the committed program")
    ok = not problems
    report(2, "blind-spot fixtures commit under post-hoc scanning, rejected by anchors", ok, "; ".join(problems))
    assert ok, problems


# ---------------------------------------------------------------------------
# 3. ablation ordering
# ---------------------------------------------------------------------------


def test_ablation_ordering(report):
    runs = run_ablation(bundled_corpus("adversarial"), FE, RunConfig())
    s = {mode: summarize(result.records, mode.value) for mode, result in runs.items()}
    dr = {mode: s[mode].dr for mode in s}
    ok = (
        dr[Mode.GATE_ONLY] == dr[Mode.NO_ASSIMILATION] == dr[Mode.FULL] == 0
        and 0 < dr[Mode.ANCHOR_ONLY] < dr[Mode.BASELINE]
        and s[Mode.FULL].fsr is not None
        and s[Mode.NO_ASSIMILATION].fsr is not None
        and s[Mode.FULL].fsr > s[Mode.NO_ASSIMILATION].fsr
    )
    detail = ", ".join(f"DR({m.value})={dr[m]:.2f}" for m in dr)
    detail += f", FSR(full)={s[Mode.FULL].fsr}, FSR(no_assimilation)={s[Mode.NO_ASSIMILATION].fsr}"
    report(3, "ablation ordering", ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 4. metric oracle
# ---------------------------------------------------------------------------

ORACLE_METRICS = ("dr", "smr", "delta_v", "ssdr", "rdr", "delta_s", "delta_r", "cev", "delta_f", "ac", "avr",
                  "fsr", "rer", "tcr", "rr", "cer")


def test_metric_oracle_equivalence(report):
    mismatches = []
    for seed in range(200):
        rng = random.Random(1000 + seed)
        plain, paired = random_chain_set(rng), random_chain_set(rng)
        expected = oracle(plain, paired)
        summary = summarize(build_all(plain), "x", build_all(paired))
        for name in ORACLE_METRICS:
            want, got = expected[name], getattr(summary, name)
            if isinstance(want, int) and not isinstance(want, Fraction):
                same = got == want  # counts compare exactly
            else:
                same = agree(want, got, 1e-9)
            if not same:
                mismatches.append((seed, name, want, got))
    ok = not mismatches
    report(4, "metrics agree with brute-force recount on 200 random sets", ok, f"{len(mismatches)} mismatches")
    assert ok, mismatches[:10]


# ---------------------------------------------------------------------------
# 5. anchor lifecycle
# ---------------------------------------------------------------------------


def _idle_lifetime(priority: Severity, limit: int = 40) -> int | None:
    """Iterations an unmatched anchor survives, None when it never expires."""
    ttl = {Severity.MEDIUM: 10, Severity.LOW: 5}.get(priority)
    spec = SecuritySpec((Anchor(AnchorType.SUBSTRING, "needle", priority=priority, ttl_remaining=ttl),))
    empty = CodeSnapshot("x = 1\n")
    for i in range(1, limit + 1):
        spec = mine_anchors(empty, prior=spec, iteration=i)
        if not spec.anchors:
            return i
    return None


def _lifetime_after_reset(priority: Severity, idle_before: int) -> int:
    ttl = {Severity.MEDIUM: 10, Severity.LOW: 5}[priority]
    spec = SecuritySpec((Anchor(AnchorType.SUBSTRING, "needle", priority=priority, ttl_remaining=ttl),))
    i = 0
    for _ in range(idle_before):
        i += 1
        spec = mine_anchors(CodeSnapshot("x = 1\n"), prior=spec, iteration=i)
    i += 1
    spec = mine_anchors(CodeSnapshot("needle = 1\n"), prior=spec, iteration=i)
    for n in range(1, 30):
        spec = mine_anchors(CodeSnapshot("x = 1\n"), prior=spec, iteration=i + n)
        if not spec.anchors:
            return n
    return -1


RENAMED = CodeSnapshot("def verify(x):\n    if not x:\n        raise ValueError(x)\n    return x\n")


def _migrate(priority: Severity, lock: LockLevel, evidence: str = ""):
    ttl = {Severity.MEDIUM: 10, Severity.LOW: 5}.get(priority)
    anchor = Anchor(AnchorType.FUNCTION_SIGNATURE, "check(x)", lock_level=lock, priority=priority, ttl_remaining=ttl)
    spec = SecuritySpec((anchor,))
    new, outcome = process_migration(MigrationRequest(anchor.anchor_id, "verify(x)", evidence), RENAMED, spec)
    return anchor, new, outcome


def test_anchor_lifecycle(report):
    problems = []
    lifetimes = {p: _idle_lifetime(p) for p in Severity}
    if lifetimes != {Severity.CRITICAL: None, Severity.HIGH: None, Severity.MEDIUM: 10, Severity.LOW: 5}:
        problems.append(f"idle lifetimes {lifetimes}")
    for priority, ttl in ((Severity.MEDIUM, 10), (Severity.LOW, 5)):
        for idle in range(ttl):
            if _lifetime_after_reset(priority, idle) != ttl:
                problems.append(f"{priority.value} after {idle} idle iterations did not reset")
    for priority in Severity:
        for lock in LockLevel:
            evidence = "body unchanged apart from the name" if priority is Severity.CRITICAL else ""
            old, new, outcome = _migrate(priority, lock, evidence)
            moved = [a for a in new.anchors if a.selector == "verify(x)"]
            if not outcome.accepted or len(moved) != 1:
                problems.append(f"{priority.value}/{lock.value} migration refused: {outcome.reason}")
            elif (moved[0].priority, moved[0].lock_level) != (old.priority, old.lock_level):
                problems.append(f"{priority.value}/{lock.value} migration changed priority or lock")
        if priority is Severity.CRITICAL:
            for lock in LockLevel:
                _, new, outcome = _migrate(priority, lock)
                if outcome.accepted or [a.selector for a in new.anchors] != ["check(x)"]:
                    problems.append(f"critical/{lock.value} migration accepted without evidence")
    ok = not problems
    report(5, "anchor TTL expiry, reset and migration rules", ok, "; ".join(problems))
    assert ok, problems


# ---------------------------------------------------------------------------
# 6. gate formula conformance
# ---------------------------------------------------------------------------


def _profile(counts: tuple[int, int, int, int], loc: int) -> RiskProfile:
    c = SeverityCounts(*counts)
    risk = compute_risk(c)
    return RiskProfile(c, risk, compute_rho(risk, loc), loc)


# (prev counts, curr counts) -> change in critical+high count
DELTA_CH = [
    ((0, 0, 0, 0), (0, 0, 0, 0), 0),
    ((0, 0, 0, 0), (0, 1, 0, 0), 1),
    ((0, 0, 0, 0), (1, 0, 0, 0), 1),
    ((1, 2, 0, 0), (0, 1, 0, 0), -2),
    ((0, 0, 5, 7), (0, 0, 0, 0), 0),
    ((0, 0, 0, 0), (0, 0, 3, 9), 0),
    ((2, 0, 0, 0), (0, 2, 0, 0), 0),
    ((1, 1, 1, 1), (2, 2, 2, 2), 2),
    ((3, 4, 0, 1), (3, 4, 0, 0), 0),
    ((0, 3, 0, 0), (2, 3, 1, 0), 2),
    ((4, 4, 4, 4), (0, 0, 0, 0), -8),
]

# (counts, loc) -> (risk, rho); weights 8/5/2/1, density per thousand lines
RHO = [
    ((0, 0, 0, 0), 100, 0.0, 0.0),
    ((0, 1, 0, 0), 100, 5.0, 50.0),
    ((1, 0, 0, 0), 1000, 8.0, 8.0),
    ((1, 1, 1, 1), 16, 16.0, 1000.0),
    ((0, 0, 2, 0), 40, 4.0, 100.0),
    ((0, 0, 0, 3), 3, 3.0, 1000.0),
    ((2, 0, 0, 0), 0, 16.0, 16000.0),  # empty program: LOC clamped to 1
    ((0, 0, 0, 1), 1, 1.0, 1000.0),
    ((0, 0, 0, 0), 0, 0.0, 0.0),
    ((0, 2, 1, 0), 250, 12.0, 48.0),
    ((3, 0, 0, 2), 52, 26.0, 500.0),
]

# (prev counts, prev loc, curr counts, curr loc, delta_max, epsilon) -> passes
PASS_CONDITION = [
    ((0, 0, 0, 0), 100, (0, 0, 0, 0), 100, 0, 0.0, True),
    ((0, 0, 0, 0), 100, (0, 1, 0, 0), 100, 0, 0.0, False),  # count grows
    ((0, 1, 0, 0), 100, (0, 1, 0, 0), 50, 0, 0.0, False),  # same count, density doubles
    ((0, 1, 0, 0), 100, (0, 1, 0, 0), 200, 0, 0.0, True),  # density falls
    ((0, 0, 0, 0), 100, (0, 0, 1, 0), 100, 0, 0.0, False),  # medium raises density only
    ((0, 0, 0, 0), 100, (0, 0, 1, 0), 100, 0, 20.0, True),  # exactly at epsilon
    ((0, 0, 0, 0), 100, (0, 0, 1, 0), 100, 0, 19.0, False),
    ((0, 0, 0, 0), 100, (0, 1, 0, 0), 100, 1, 50.0, True),  # exactly at both limits
    ((0, 0, 0, 0), 100, (0, 2, 0, 0), 100, 1, 100.0, False),
    ((1, 0, 0, 0), 100, (0, 1, 0, 0), 100, 0, 0.0, True),  # critical replaced by high
    ((0, 1, 0, 0), 100, (1, 0, 0, 0), 100, 0, 0.0, False),  # high replaced by critical
    ((0, 2, 0, 0), 100, (0, 1, 0, 0), 100, 0, 0.0, True),
]

# (added, deleted, b_add, b_del) -> within budget
BUDGET = [
    (0, 0, 150, 100, True),
    (150, 100, 150, 100, True),
    (151, 0, 150, 100, False),
    (0, 101, 150, 100, False),
    (150, 101, 150, 100, False),
    (149, 99, 150, 100, True),
    (0, 0, 0, 0, True),
    (1, 0, 0, 0, False),
    (0, 1, 0, 0, False),
    (10, 10, 10, 10, True),
    (11, 10, 10, 10, False),
]

# (before, after) -> (lines added, lines deleted)
DIFFS = [
    ("", "", 0, 0),
    ("a\n", "a\n", 0, 0),
    ("", "a\nb\n", 2, 0),
    ("a\nb\n", "", 0, 2),
    ("a\nb\nc\n", "a\nc\n", 0, 1),
    ("a\nc\n", "a\nb\nc\n", 1, 0),
    ("a\nb\nc\n", "a\nB\nc\n", 1, 1),
    ("a\nb\nc\nd\n", "d\nc\nb\na\n", 3, 3),
    ("x\ny\n", "y\nx\n", 1, 1),
    ("a\na\na\n", "a\n", 0, 2),
]


def test_gate_formula_conformance(report):
    problems = []
    cfg = GateConfig()
    for prev, curr, expected in DELTA_CH:
        got = check_safety(_profile(prev, 100), _profile(curr, 100), GateConfig(delta_max=99, epsilon=1e9))[1]
        if got != expected:
            problems.append(f"delta_ch {prev}->{curr}: {got} != {expected}")
    for counts, loc, risk, rho in RHO:
        got_risk = compute_risk(SeverityCounts(*counts))
        if (got_risk, compute_rho(got_risk, loc)) != (risk, rho):
            problems.append(f"rho {counts}@{loc}: {got_risk}, {compute_rho(got_risk, loc)}")
    for prev, ploc, curr, cloc, delta_max, eps, expected in PASS_CONDITION:
        verdict = check_safety(_profile(prev, ploc), _profile(curr, cloc), GateConfig(delta_max=delta_max, epsilon=eps))[0]
        if (verdict is GateVerdict.PASS) != expected:
            problems.append(f"pass condition {prev}@{ploc}->{curr}@{cloc} d={delta_max} e={eps}: {verdict.value}")
    for added, deleted, b_add, b_del, expected in BUDGET:
        verdict = check_diff_budget(DiffStats(added, deleted), dataclasses.replace(cfg, b_add=b_add, b_del=b_del))
        if (verdict is GateVerdict.PASS) != expected:
            problems.append(f"budget +{added}/-{deleted} within {b_add}/{b_del}: {verdict.value}")
    for before, after, added, deleted in DIFFS:
        got = diff_text(before, after)
        if (got.lines_added, got.lines_deleted) != (added, deleted):
            problems.append(f"diff {before!r}->{after!r}: {got}")
    ok = not problems
    n = f"{len(DELTA_CH)}/{len(RHO)}/{len(PASS_CONDITION)}/{len(BUDGET)}/{len(DIFFS)} cases"
    report(6, "count change, risk density, pass condition and diff budgets", ok, "; ".join(problems) or n)
    assert ok, problems


# ---------------------------------------------------------------------------
# 7. determinism
# ---------------------------------------------------------------------------

# provenance fields that legitimately differ between invocations
VOLATILE_MANIFEST_KEYS = ("started", "finished")


def _run_suite_cli(out: Path) -> None:
    subprocess.run(
        [sys.executable, "-m", "anchorgate.cli", "run-suite", "bundled:adversarial", "--ablation", "--out", str(out)],
        check=True,
        capture_output=True,
    )


def _outputs(root: Path) -> dict[str, bytes]:
    files = {}
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        data = path.read_bytes()
        if path.name == "manifest.json":
            manifest = json.loads(data)
            for key in VOLATILE_MANIFEST_KEYS:
                manifest.pop(key)
            data = json.dumps(manifest, sort_keys=True).encode()
        files[str(path.relative_to(root))] = data
    return files


def test_run_suite_is_deterministic(tmp_path, report):
    first, second = tmp_path / "first", tmp_path / "second"
    _run_suite_cli(first)
    _run_suite_cli(second)
    a, b = _outputs(first), _outputs(second)
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    ok = not differing and any(k.endswith("records.jsonl") for k in a) and "comparison.data" in a
    report(7, "two run-suite invocations give identical outputs", ok, f"{len(a)} files, differing: {differing}")
    assert ok, differing


# ---------------------------------------------------------------------------
# 8. external scanner
# ---------------------------------------------------------------------------


def test_semgrep_adapter(report):
    if shutil.which("semgrep") is None:
        report(8, "Semgrep adapter on the fixture corpus", None, "semgrep not installed")
        pytest.skip("semgrep not installed")
    scanner = ExternalAnalyzer()
    scanned = 0
    for name in ("standard", "adversarial", "java"):
        samples, _ = discover(bundled_corpus(name))
        for sample in samples:
            _, profile = analyze(sample.snapshot(), scanner)
            assert isinstance(profile.counts, SeverityCounts)
            scanned += 1
    report(8, "Semgrep adapter on the fixture corpus", True, f"{scanned} samples scanned")
