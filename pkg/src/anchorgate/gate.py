"""Four-layer candidate gate: correctness, safety monotonicity, diff budget, anchor integrity."""

from __future__ import annotations

import hashlib
import re
import shlex
import shutil
import subprocess
import sys
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

from anchorgate.anchors import Library, to_checks, verify_anchors
from anchorgate.errors import BackendProtocolError, BackendUnavailable, ConfigError, ParseError
from anchorgate.frontend import diff_stats
from anchorgate.model import (
    LAYERS,
    CodeSnapshot,
    Decision,
    DiffStats,
    GateReport,
    GateVerdict,
    RiskProfile,
    Scope,
    SecuritySpec,
    SeverityCounts,
)
from anchorgate.sast import Analyzer, BuiltinAnalyzer, analyze, compute_rho, compute_risk, new_findings


@dataclass(frozen=True)
class GateConfig:
    delta_max: int = 0
    epsilon: float = 0.0
    b_add: int = 150
    b_del: int = 100
    r_max: int = 3
    severity_scope: Scope = Scope.CRITICAL_HIGH
    rho_scope: Scope = Scope.ALL

    def __post_init__(self):
        for name in ("delta_max", "epsilon", "b_add", "b_del"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.r_max < 1:
            raise ValueError("r_max must be >= 1")


# ---------------------------------------------------------------------------
# correctness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestHarness:
    """How to test one sample: a tests directory copied next to ``code.<ext>``."""

    __test__ = False

    tests_dir: Path
    command: str
    timeout_s: float = 30.0


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    passed: bool
    failing_tests: tuple[str, ...] = ()
    output: str = ""
    timed_out: bool = False


_PYTEST_FAIL = re.compile(r"^(?:FAILED|ERROR) ([^\s(]\S*)", re.M)
_UNITTEST_FAIL = re.compile(r"^(?:FAIL|ERROR): (\w+) \(([\w.]+)\)", re.M)
_JUNIT_FAIL = re.compile(r"^\d+\) (\w+)\(([\w.]+)\)", re.M)
# wall-clock durations printed by test runners; masked so records are reproducible
_DURATION = re.compile(r"(\bin |\bTime: )(?:\d+\.\d+s?|\d+s)\b")


def normalize_output(output: str) -> str:
    return _DURATION.sub(r"\1<t>", output)


def parse_failing_tests(output: str) -> tuple[str, ...]:
    names = [m.group(1) for m in _PYTEST_FAIL.finditer(output)]
    names += [f"{m.group(2)}.{m.group(1)}" for m in _UNITTEST_FAIL.finditer(output)]
    names += [f"{m.group(2)}.{m.group(1)}" for m in _JUNIT_FAIL.finditer(output)]
    return tuple(dict.fromkeys(names))


class TestRunner:
    """Runs a harness against candidates in throwaway workspaces, memoizing by content."""

    __test__ = False

    def __init__(self, max_entries: int = 4096):
        self._cache: dict[str, TestResult] = {}
        self._lock = threading.Lock()
        self.max_entries = max_entries
        self.executions = 0

    def _key(self, candidate: CodeSnapshot, harness: TestHarness) -> str:
        h = hashlib.sha256()
        for part in (candidate.language.value, candidate.source, str(harness.tests_dir.resolve()), harness.command):
            h.update(part.encode("utf-8"))
            h.update(b"\0")
        return h.hexdigest()

    def run(self, candidate: CodeSnapshot, harness: TestHarness) -> TestResult:
        if not harness.command.strip():
            raise ConfigError("sample declares no test command")
        if not harness.tests_dir.is_dir():
            raise ConfigError(f"test directory missing: {harness.tests_dir}")
        key = self._key(candidate, harness)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        result = self._execute(candidate, harness)
        with self._lock:
            if len(self._cache) >= self.max_entries:
                self._cache.clear()
            self._cache[key] = result
            self.executions += 1
        return result

    def _execute(self, candidate: CodeSnapshot, harness: TestHarness) -> TestResult:
        with tempfile.TemporaryDirectory(prefix="anchorgate-tests-") as tmp:
            work = Path(tmp)
            (work / f"code{candidate.language.extension}").write_text(candidate.source, encoding="utf-8")
            shutil.copytree(harness.tests_dir, work / "tests")
            argv = [part.replace("{python}", sys.executable) for part in shlex.split(harness.command)]
            try:
                proc = subprocess.run(
                    argv, cwd=work, capture_output=True, text=True, timeout=harness.timeout_s, stdin=subprocess.DEVNULL
                )
            except subprocess.TimeoutExpired:
                return TestResult(False, (), f"timed out after {harness.timeout_s}s", timed_out=True)
            except FileNotFoundError as exc:
                raise ConfigError(f"test command not found: {exc}") from None
        output = normalize_output(proc.stdout + proc.stderr)[-8000:]
        if proc.returncode == 0:
            return TestResult(True, (), output)
        return TestResult(False, parse_failing_tests(output), output)


def check_correctness(candidate: CodeSnapshot, harness: TestHarness, runner: TestRunner | None = None) -> GateVerdict:
    return GateVerdict.PASS if (runner or TestRunner()).run(candidate, harness).passed else GateVerdict.FAIL_RETRY


# ---------------------------------------------------------------------------
# safety, diff budget
# ---------------------------------------------------------------------------


def _scoped_risk(profile: RiskProfile, scope: Scope) -> float:
    if scope is Scope.ALL:
        return profile.risk
    c = profile.counts
    return compute_risk(SeverityCounts(critical=c.critical, high=c.high))


def check_safety(prev: RiskProfile, curr: RiskProfile, cfg: GateConfig) -> tuple[GateVerdict, int, float]:
    """Verdict plus the change in vulnerability count and in risk density."""
    d_count = curr.counts.of_scope(cfg.severity_scope) - prev.counts.of_scope(cfg.severity_scope)
    if cfg.rho_scope is Scope.ALL:
        d_rho = curr.rho - prev.rho
    else:
        d_rho = compute_rho(_scoped_risk(curr, cfg.rho_scope), curr.loc) - compute_rho(
            _scoped_risk(prev, cfg.rho_scope), prev.loc
        )
    ok = d_count <= cfg.delta_max and d_rho <= cfg.epsilon
    return (GateVerdict.PASS if ok else GateVerdict.FAIL_RETRY), d_count, d_rho


def budget_overruns(stats: DiffStats, cfg: GateConfig) -> tuple[str, ...]:
    out = []
    if stats.lines_added > cfg.b_add:
        out.append(f"L_add {stats.lines_added} > {cfg.b_add}")
    if stats.lines_deleted > cfg.b_del:
        out.append(f"L_del {stats.lines_deleted} > {cfg.b_del}")
    return tuple(out)


def check_diff_budget(stats: DiffStats, cfg: GateConfig) -> GateVerdict:
    return GateVerdict.FAIL_RETRY if budget_overruns(stats, cfg) else GateVerdict.PASS


# ---------------------------------------------------------------------------
# orchestration of the layers
# ---------------------------------------------------------------------------


def decide(verdicts: list[GateVerdict], attempt_index: int, r_max: int) -> Decision:
    worst = GateVerdict.worst(verdicts)
    if worst is GateVerdict.FAIL:
        return Decision.ROLLBACK
    if worst is GateVerdict.FAIL_RETRY:
        return Decision.RETRY if attempt_index + 1 < r_max else Decision.ROLLBACK
    return Decision.ACCEPT


@dataclass
class GateContext:
    """Collaborators a gate evaluation needs; shared across the attempts of a chain."""

    harness: TestHarness | None = None
    runner: TestRunner = field(default_factory=TestRunner)
    analyzer: Analyzer = field(default_factory=BuiltinAnalyzer)
    library: Library | None = None
    weights: dict[str, float] | None = None


def run_gate(
    prev: CodeSnapshot,
    candidate: CodeSnapshot,
    spec: SecuritySpec,
    cfg: GateConfig,
    *,
    ctx: GateContext | None = None,
    layers: tuple[str, ...] = LAYERS,
    attempt_index: int = 0,
) -> GateReport:
    """Evaluate ``candidate`` against ``prev`` layer by layer.

    Layers outside ``layers`` are skipped (recorded as ``None``); the first
    blocking verdict stops the remaining layers.  Backend and configuration
    errors become a Fail on the affected layer, hence a rollback.
    """
    ctx = ctx or GateContext()
    unknown = set(layers) - set(LAYERS)
    if unknown:
        raise ConfigError(f"unknown gate layers: {sorted(unknown)}")
    fields: dict = {"layers_enabled": tuple(l for l in LAYERS if l in layers)}
    verdicts: list[GateVerdict] = []

    def finish(diagnostic: str = "") -> GateReport:
        failed = next((l for l in LAYERS if fields.get(l) is not None and fields[l].blocking), None)
        return GateReport(
            **fields,
            decision=decide(verdicts, attempt_index, cfg.r_max),
            failed_layer=failed,
            diagnostic=diagnostic,
        )

    for layer in LAYERS:
        if layer not in layers:
            continue
        try:
            verdict = _run_layer(layer, prev, candidate, spec, cfg, ctx, fields)
        except (ConfigError, BackendUnavailable, BackendProtocolError) as exc:
            fields[layer] = GateVerdict.FAIL
            verdicts.append(GateVerdict.FAIL)
            return finish(f"{layer}: {type(exc).__name__}: {exc}")
        fields[layer] = verdict
        verdicts.append(verdict)
        if verdict.blocking:
            return finish(fields.pop("_diagnostic", ""))
    return finish(fields.pop("_diagnostic", ""))


def _run_layer(
    layer: str,
    prev: CodeSnapshot,
    candidate: CodeSnapshot,
    spec: SecuritySpec,
    cfg: GateConfig,
    ctx: GateContext,
    fields: dict,
) -> GateVerdict:
    if layer == "correctness":
        if ctx.harness is None:
            raise ConfigError("correctness layer enabled but the sample has no test harness")
        result = ctx.runner.run(candidate, ctx.harness)
        fields.update(failing_tests=result.failing_tests, test_output=result.output, timed_out=result.timed_out)
        return GateVerdict.PASS if result.passed else GateVerdict.FAIL_RETRY

    if layer == "safety":
        prev_findings, prev_profile = analyze(prev, ctx.analyzer, ctx.weights)
        try:
            cand_findings, cand_profile = analyze(candidate, ctx.analyzer, ctx.weights)
        except ParseError as exc:
            fields["_diagnostic"] = f"safety: candidate unparseable: {exc}"
            return GateVerdict.FAIL_RETRY
        verdict, d_count, d_rho = check_safety(prev_profile, cand_profile, cfg)
        fields.update(delta_ch=d_count, delta_rho=d_rho, new_findings=tuple(new_findings(prev_findings, cand_findings)))
        return verdict

    if layer == "diff_budget":
        stats = diff_stats(prev, candidate)
        overruns = budget_overruns(stats, cfg)
        fields.update(diff=stats, budget_exceeded=overruns)
        return GateVerdict.FAIL_RETRY if overruns else GateVerdict.PASS

    results = verify_anchors(candidate, spec, ctx.library)
    fields["anchor_checks"] = to_checks(results)
    return GateVerdict.worst(v for _, v in results)


__all__ = [
    "GateConfig",
    "GateContext",
    "TestHarness",
    "TestResult",
    "TestRunner",
    "budget_overruns",
    "check_correctness",
    "check_diff_budget",
    "check_safety",
    "decide",
    "parse_failing_tests",
    "run_gate",
]
