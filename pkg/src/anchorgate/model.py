"""Core vocabulary of the refinement loop.

A chain starts from a baseline program and moves through committed states,
one per refinement task.  Every value here is an immutable dataclass so a
finished :class:`ChainRecord` can be re-checked after the fact: monotonicity,
metrics and audits all read the record and nothing else.

Records are serialized as JSON objects, one chain per line, through the small
type-driven codec at the bottom of this module.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import os
import tempfile
import types
import typing
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Sequence

from anchorgate.errors import AnalysisMissing, EmptyChain

SCHEMA_VERSION = 1


class Language(enum.Enum):
    PYTHON = "python"
    JAVA = "java"

    @property
    def extension(self) -> str:
        return {"python": ".py", "java": ".java"}[self.value]

    @classmethod
    def from_path(cls, path: str | os.PathLike) -> "Language":
        suffix = Path(path).suffix.lower()
        for lang in cls:
            if lang.extension == suffix:
                return lang
        from anchorgate.errors import UnsupportedLanguage

        raise UnsupportedLanguage(f"no frontend for {suffix or path!s}")


class Strategy(enum.Enum):
    FEATURE_ENHANCEMENT = "feature_enhancement"
    PERFORMANCE_OPTIMIZATION = "performance_optimization"
    SECURITY_HARDENING = "security_hardening"
    AMBIGUOUS_REQUIREMENT = "ambiguous_requirement"


class Category(enum.Enum):
    DATABASE = "database"
    INPUT = "input"
    AUTHENTICATION = "authentication"
    RESOURCES = "resources"
    CRYPTOGRAPHY = "cryptography"
    PATH = "path"


class Severity(enum.Enum):
    """Four-level scale shared by findings and anchor priorities."""

    CRITICAL = "critical"
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"

    @property
    def rank(self) -> int:
        return _SEVERITY_RANK[self]

    def lowered(self) -> "Severity":
        order = list(Severity)
        return order[min(order.index(self) + 1, len(order) - 1)]


_SEVERITY_RANK = {Severity.CRITICAL: 3, Severity.HIGH: 2, Severity.MEDIUM: 1, Severity.LOW: 0}


class Scope(enum.Enum):
    ALL = "all"
    CRITICAL_HIGH = "critical_high"


class GateVerdict(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    FAIL_RETRY = "fail_retry"
    WARN = "warn"

    @property
    def blocking(self) -> bool:
        return self in (GateVerdict.FAIL, GateVerdict.FAIL_RETRY)

    @staticmethod
    def worst(verdicts: Iterable["GateVerdict"]) -> "GateVerdict":
        order = [GateVerdict.PASS, GateVerdict.WARN, GateVerdict.FAIL_RETRY, GateVerdict.FAIL]
        return max(verdicts, key=order.index, default=GateVerdict.PASS)


class Decision(enum.Enum):
    ACCEPT = "accept"
    RETRY = "retry"
    ROLLBACK = "rollback"


class Outcome(enum.Enum):
    COMMITTED = "committed"
    ROLLED_BACK = "rolled_back"


class FailureType(enum.Enum):
    CORRECTNESS = "correctness"
    SAFETY_MONOTONICITY = "safety_monotonicity"
    ANCHOR_VIOLATION = "anchor_violation"
    DIFF_BUDGET = "diff_budget"


class AnchorType(enum.Enum):
    SUBSTRING = "substring"
    REGEX = "regex"
    AST = "ast"
    FUNCTION_SIGNATURE = "function_signature"
    INVARIANT = "invariant"


class LockLevel(enum.Enum):
    HARD = "hard"
    SOFT = "soft"


class Mode(enum.Enum):
    FULL = "full"
    ANCHOR_ONLY = "anchor_only"
    GATE_ONLY = "gate_only"
    NO_ASSIMILATION = "no_assimilation"
    BASELINE = "baseline"
    PROMPT_SECURITY = "prompt_security"
    SELF_REFINE = "self_refine"
    POST_HOC_SAST = "post_hoc_sast"
    TEST_GUARD = "test_guard"
    HYBRID_GUARD = "hybrid_guard"


class ChainStatus(enum.Enum):
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"


class ReviewCategory(enum.Enum):
    LATENT_SECURITY = "latent_security"
    RELIABILITY = "reliability"


# ---------------------------------------------------------------------------
# programs and tasks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeverityCounts:
    critical: int = 0
    high: int = 0
    medium: int = 0
    low: int = 0

    def __post_init__(self):
        if min(self.critical, self.high, self.medium, self.low) < 0:
            raise ValueError(f"negative severity count: {self}")

    @property
    def total(self) -> int:
        return self.critical + self.high + self.medium + self.low

    @property
    def ch_total(self) -> int:
        return self.critical + self.high

    def of_scope(self, scope: Scope) -> int:
        return self.total if scope is Scope.ALL else self.ch_total

    @classmethod
    def from_findings(cls, findings: Iterable["Finding"]) -> "SeverityCounts":
        tally = {s: 0 for s in Severity}
        for f in findings:
            tally[f.severity] += 1
        return cls(
            tally[Severity.CRITICAL], tally[Severity.HIGH], tally[Severity.MEDIUM], tally[Severity.LOW]
        )


@dataclass(frozen=True)
class CodeSnapshot:
    """One program state of a chain; ``loc`` is filled in on construction."""

    source: str
    language: Language = Language.PYTHON
    iteration_index: int = 0
    severity_counts: SeverityCounts | None = None
    loc: int = -1

    def __post_init__(self):
        if self.iteration_index < 0:
            raise ValueError("iteration_index must be >= 0")
        if self.loc < 0:
            from anchorgate.frontend.loc import count_loc_text

            object.__setattr__(self, "loc", count_loc_text(self.source, self.language))

    @cached_property
    def digest(self) -> str:
        return hashlib.sha256(self.source.encode("utf-8")).hexdigest()[:16]

    def with_counts(self, counts: SeverityCounts) -> "CodeSnapshot":
        return dataclasses.replace(self, severity_counts=counts)

    def advanced(self, source: str, iteration_index: int) -> "CodeSnapshot":
        return CodeSnapshot(source, self.language, iteration_index)


@dataclass(frozen=True)
class RefinementTask:
    description: str
    strategy: Strategy
    category: Category


@dataclass(frozen=True)
class DiffStats:
    lines_added: int = 0
    lines_deleted: int = 0

    def __post_init__(self):
        if self.lines_added < 0 or self.lines_deleted < 0:
            raise ValueError("diff stats must be non-negative")

    @property
    def churn(self) -> int:
        return self.lines_added + self.lines_deleted


# ---------------------------------------------------------------------------
# static analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    rule_id: str
    severity: Severity
    line: int
    message: str = ""

    def __post_init__(self):
        if self.line < 1:
            raise ValueError("finding line must be >= 1")


@dataclass(frozen=True)
class RiskProfile:
    counts: SeverityCounts
    risk: float
    rho: float
    loc: int = 0


# ---------------------------------------------------------------------------
# anchors
# ---------------------------------------------------------------------------

INITIAL_TTL = {Severity.MEDIUM: 10, Severity.LOW: 5}


@dataclass(frozen=True)
class Anchor:
    anchor_type: AnchorType
    selector: str
    lock_level: LockLevel = LockLevel.HARD
    priority: Severity = Severity.HIGH
    created_iteration: int = 0
    confidence: float = 1.0
    ttl_remaining: int | None = None
    label: str = ""
    source: str = ""  # which mining rule produced it
    downgrades: int = 0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        if self.priority in (Severity.CRITICAL, Severity.HIGH) and self.ttl_remaining is not None:
            raise ValueError("critical/high anchors do not carry a TTL")

    @property
    def key(self) -> tuple[str, str]:
        return (self.anchor_type.value, self.selector)

    @property
    def anchor_id(self) -> str:
        raw = f"{self.anchor_type.value}\x00{self.selector}".encode("utf-8")
        return hashlib.blake2b(raw, digest_size=5).hexdigest()

    @property
    def display(self) -> str:
        return self.label or self.selector

    def with_fresh_ttl(self) -> "Anchor":
        return dataclasses.replace(self, ttl_remaining=INITIAL_TTL.get(self.priority))


@dataclass(frozen=True)
class SecuritySpec:
    """The anchored constraint set for one program state.

    ``rule_base`` lists the invariant ids applicable to the category; the
    invariant anchors are the subset that currently holds and is enforced.
    """

    anchors: tuple[Anchor, ...] = ()
    rule_base: tuple[str, ...] = ()
    category: Category | None = None

    def __post_init__(self):
        keys = [a.key for a in self.anchors]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate anchor (anchor_type, selector)")

    @property
    def invariant_anchors(self) -> tuple[Anchor, ...]:
        return tuple(a for a in self.anchors if a.anchor_type is AnchorType.INVARIANT)

    @property
    def api_signature_anchors(self) -> tuple[Anchor, ...]:
        return tuple(a for a in self.anchors if a.anchor_type is AnchorType.FUNCTION_SIGNATURE)

    @property
    def pattern_anchors(self) -> tuple[Anchor, ...]:
        kinds = (AnchorType.SUBSTRING, AnchorType.REGEX, AnchorType.AST)
        return tuple(a for a in self.anchors if a.anchor_type in kinds)

    @property
    def hard_anchors(self) -> tuple[Anchor, ...]:
        return tuple(a for a in self.anchors if a.lock_level is LockLevel.HARD)

    def find(self, ref: str) -> Anchor | None:
        for a in self.anchors:
            if ref in (a.anchor_id, a.selector, a.label):
                return a
        return None


@dataclass(frozen=True)
class MigrationRequest:
    old_anchor: str
    new_selector: str
    evidence: str = ""
    requested_iteration: int = 0


@dataclass(frozen=True)
class MigrationOutcome:
    request: MigrationRequest
    accepted: bool
    reason: str = ""


@dataclass(frozen=True)
class AnchorCheck:
    anchor_id: str
    selector: str
    anchor_type: AnchorType
    priority: Severity
    lock_level: LockLevel
    present: bool
    verdict: GateVerdict
    label: str = ""


# ---------------------------------------------------------------------------
# gate, counterexamples, lessons
# ---------------------------------------------------------------------------

LAYERS = ("correctness", "safety", "diff_budget", "anchor_integrity")


@dataclass(frozen=True)
class GateReport:
    """Per-layer outcome of one candidate.  ``None`` marks a layer that did not run."""

    correctness: GateVerdict | None = None
    safety: GateVerdict | None = None
    diff_budget: GateVerdict | None = None
    anchor_integrity: GateVerdict | None = None
    delta_ch: int | None = None
    delta_rho: float | None = None
    decision: Decision = Decision.ACCEPT
    failed_layer: str | None = None
    layers_enabled: tuple[str, ...] = LAYERS
    failing_tests: tuple[str, ...] = ()
    test_output: str = ""
    timed_out: bool = False
    new_findings: tuple[Finding, ...] = ()
    diff: DiffStats | None = None
    budget_exceeded: tuple[str, ...] = ()
    anchor_checks: tuple[AnchorCheck, ...] = ()
    diagnostic: str = ""

    def verdict(self, layer: str) -> GateVerdict | None:
        return getattr(self, layer)

    @property
    def warnings(self) -> tuple[str, ...]:
        return tuple(l for l in LAYERS if self.verdict(l) is GateVerdict.WARN)


@dataclass(frozen=True)
class Counterexample:
    failure_type: FailureType
    violated_constraints: tuple[str, ...]
    message: str
    locations: tuple[int, ...] = ()
    elements: tuple[str, ...] = ()
    selector_class: str = ""
    iteration: int = 0
    attempt: int = 0

    def __post_init__(self):
        if not self.violated_constraints:
            raise ValueError("a counterexample needs at least one violated constraint")
        if not self.message:
            raise ValueError("a counterexample needs a message")

    @property
    def signature(self) -> tuple[str, str]:
        return (self.failure_type.value, self.selector_class)

    def render(self) -> str:
        where = f" (lines {', '.join(map(str, self.locations))})" if self.locations else ""
        return f"[{self.failure_type.value}] {self.message}{where}"


@dataclass(frozen=True)
class IterationFeedback:
    """Anchor-relevant digest of one iteration, fed back into the spec.

    ``violated`` holds ids of anchors missing in the accepted candidate (warnings
    that were let through); ``failure_elements`` holds the element names of each
    counterexample raised during the iteration.
    """

    iteration: int
    committed: bool
    violated: tuple[str, ...] = ()
    failure_elements: tuple[tuple[str, ...], ...] = ()


@dataclass(frozen=True)
class LessonRule:
    text: str
    category: Category
    failure_type: FailureType
    selector_class: str
    occurrences: int
    created_at: int  # iteration index of first synthesis
    updated_at: int = 0


# ---------------------------------------------------------------------------
# review
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReviewIssue:
    line: int
    category: ReviewCategory
    type: str
    description: str = ""


@dataclass(frozen=True)
class ReviewSummary:
    issues: tuple[ReviewIssue, ...] = ()

    @property
    def s_count(self) -> int:
        return sum(1 for i in self.issues if i.category is ReviewCategory.LATENT_SECURITY)

    @property
    def r_count(self) -> int:
        return sum(1 for i in self.issues if i.category is ReviewCategory.RELIABILITY)


# ---------------------------------------------------------------------------
# chain records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttemptRecord:
    attempt_index: int
    candidate_id: str
    accepted: bool
    report: GateReport | None = None
    diff: DiffStats = DiffStats()
    counts: SeverityCounts | None = None
    counterexample: Counterexample | None = None
    anchor_violations: tuple[str, ...] = ()  # ids of hard anchors missing in the candidate
    anchors_checked: bool = False
    generation_error: str = ""
    migrations: tuple[MigrationOutcome, ...] = ()

    @property
    def rejected(self) -> bool:
        return not self.accepted

    @property
    def evaluated(self) -> bool:
        """True when a candidate was produced (generation errors are not gate evaluations)."""
        return not self.generation_error


@dataclass(frozen=True)
class IterationRecord:
    index: int
    task: RefinementTask
    attempts: tuple[AttemptRecord, ...]
    outcome: Outcome
    v_before: SeverityCounts
    v_after: SeverityCounts
    committed_snapshot: CodeSnapshot | None = None
    anchor_count: int = 0
    anchor_coverage: float | None = None
    lessons_used: tuple[str, ...] = ()

    def __post_init__(self):
        if self.outcome is Outcome.COMMITTED:
            if self.committed_snapshot is None or not self.attempts or not self.attempts[-1].accepted:
                raise ValueError("a committed iteration needs its snapshot and an accepted last attempt")
        elif self.committed_snapshot is not None:
            raise ValueError("a rolled-back iteration cannot carry a committed snapshot")

    @property
    def committed(self) -> bool:
        return self.outcome is Outcome.COMMITTED

    @property
    def rejections(self) -> int:
        return sum(1 for a in self.attempts if a.rejected)


@dataclass(frozen=True)
class ChainRecord:
    chain_id: str
    baseline: CodeSnapshot
    iterations: tuple[IterationRecord, ...] = ()
    baseline_review: ReviewSummary | None = None
    final_review: ReviewSummary | None = None
    config_fingerprint: str = ""
    sample_id: str = ""
    mode: Mode = Mode.FULL
    strategy: Strategy | None = None
    category: Category | None = None
    status: ChainStatus = ChainStatus.COMPLETE
    anchors_enabled: bool = False
    knowledge: tuple[Counterexample, ...] = ()
    lessons: tuple[LessonRule, ...] = ()
    final_spec: SecuritySpec | None = None
    events: tuple[str, ...] = ()
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        idx = [it.committed_snapshot.iteration_index for it in self.committed_iterations]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("committed snapshots must have strictly increasing iteration_index")

    @property
    def committed_iterations(self) -> tuple[IterationRecord, ...]:
        return tuple(it for it in self.iterations if it.committed)

    @property
    def final_snapshot(self) -> CodeSnapshot:
        committed = self.committed_iterations
        return committed[-1].committed_snapshot if committed else self.baseline

    @property
    def v_baseline(self) -> SeverityCounts:
        return _counts_of(self.baseline)

    @property
    def v_final(self) -> SeverityCounts:
        committed = self.committed_iterations
        return committed[-1].v_after if committed else self.v_baseline

    def committed_series(self, scope: Scope) -> list[int]:
        """V over the baseline followed by every committed state."""
        return [self.v_baseline.of_scope(scope)] + [
            it.v_after.of_scope(scope) for it in self.committed_iterations
        ]

    def iteration_series(self, scope: Scope) -> list[int]:
        """V after each iteration, rollbacks repeating the previous value."""
        return [self.v_baseline.of_scope(scope)] + [it.v_after.of_scope(scope) for it in self.iterations]


def _counts_of(snapshot: CodeSnapshot) -> SeverityCounts:
    if snapshot.severity_counts is None:
        raise AnalysisMissing("snapshot has not been analyzed")
    return snapshot.severity_counts


def vulnerability_count(snapshot: CodeSnapshot, scope: Scope = Scope.ALL) -> int:
    return _counts_of(snapshot).of_scope(scope)


def is_non_increasing(values: Sequence[int]) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def chain_is_monotone(chain: ChainRecord, scope: Scope = Scope.CRITICAL_HIGH) -> bool:
    if not chain.committed_iterations:
        raise EmptyChain(f"chain {chain.chain_id} has no committed iterations")
    return is_non_increasing(chain.committed_series(scope))


# ---------------------------------------------------------------------------
# JSON codec
# ---------------------------------------------------------------------------


def to_jsonable(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(to_jsonable(x) for x in obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    return obj


_HINTS: dict[type, dict[str, Any]] = {}


def from_jsonable(tp: Any, data: Any) -> Any:
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if data is None:
            return None
        return from_jsonable(args[0], data)
    if origin is tuple:
        args = typing.get_args(tp)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(from_jsonable(args[0], x) for x in data)
        return tuple(from_jsonable(a, x) for a, x in zip(args, data))
    if origin is list:
        (arg,) = typing.get_args(tp)
        return [from_jsonable(arg, x) for x in data]
    if origin is dict:
        _, val = typing.get_args(tp)
        return {k: from_jsonable(val, v) for k, v in data.items()}
    if isinstance(tp, type) and issubclass(tp, enum.Enum):
        return tp(data)
    if dataclasses.is_dataclass(tp):
        hints = _HINTS.get(tp)
        if hints is None:
            hints = _HINTS[tp] = typing.get_type_hints(tp)
        kwargs = {
            f.name: from_jsonable(hints[f.name], data[f.name])
            for f in dataclasses.fields(tp)
            if f.name in data
        }
        return tp(**kwargs)
    if tp is float and isinstance(data, int):
        return float(data)
    return data


def dumps_record(record: Any) -> str:
    return json.dumps(to_jsonable(record), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def loads_record(line: str, tp: type = ChainRecord) -> Any:
    return from_jsonable(tp, json.loads(line))


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_records(path: str | os.PathLike, records: Iterable[ChainRecord]) -> None:
    atomic_write_text(path, "".join(dumps_record(r) + "\n" for r in records))


def read_records(path: str | os.PathLike) -> list[ChainRecord]:
    with open(path, encoding="utf-8") as fh:
        return [loads_record(line) for line in fh if line.strip()]
