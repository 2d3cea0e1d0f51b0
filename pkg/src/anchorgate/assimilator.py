"""Turns gate rejections into counterexamples and recurring ones into lesson rules."""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field

from anchorgate.anchors import Library, default_library, parse_signature
from anchorgate.errors import ContractViolation, ParseError
from anchorgate.frontend import parse_functions
from anchorgate.frontend.python import enclosing_function, parse_module
from anchorgate.model import (
    AnchorType,
    Category,
    CodeSnapshot,
    Counterexample,
    Decision,
    FailureType,
    GateReport,
    GateVerdict,
    IterationFeedback,
    Language,
    LessonRule,
    SecuritySpec,
)

K_LESSON = 2
N_LESSONS = 5

_LAYER_FAILURE = {
    "correctness": FailureType.CORRECTNESS,
    "safety": FailureType.SAFETY_MONOTONICITY,
    "diff_budget": FailureType.DIFF_BUDGET,
    "anchor_integrity": FailureType.ANCHOR_VIOLATION,
}

# (failure type, selector class) -> lesson text; "*" matches any class.
LESSON_TEMPLATES: dict[tuple[FailureType, str], str] = {
    (FailureType.ANCHOR_VIOLATION, "validate"): "avoid deleting functions whose names contain validate",
    (FailureType.ANCHOR_VIOLATION, "sanitize"): "avoid deleting or bypassing functions whose names contain sanitize",
    (FailureType.ANCHOR_VIOLATION, "auth"): "keep authentication and permission checks in front of sensitive operations",
    (FailureType.ANCHOR_VIOLATION, "guard"): "keep guard functions between user input and sensitive sinks",
    (FailureType.ANCHOR_VIOLATION, "validation-error"): "keep raising ValueError on invalid input instead of silently accepting it",
    (FailureType.ANCHOR_VIOLATION, "permission-error"): "keep raising PermissionError when a caller lacks rights",
    (FailureType.ANCHOR_VIOLATION, "parameterized-query"): "keep SQL queries parameterized with placeholders",
    (FailureType.ANCHOR_VIOLATION, "typed-exception-handler"): "catch specific exception types; never widen handlers to bare or empty except blocks",
    (FailureType.ANCHOR_VIOLATION, "auth-permission-before-sensitive"): "every path to a privileged operation must pass a permission check first",
    (FailureType.ANCHOR_VIOLATION, "api"): "do not remove or change the required parameters of public functions",
    (FailureType.ANCHOR_VIOLATION, "*"): "preserve protected code elements named {cls}",
    (FailureType.SAFETY_MONOTONICITY, "sql-concat"): "use parameterized queries instead of string concatenation",
    (FailureType.SAFETY_MONOTONICITY, "sql-format"): "use parameterized queries instead of string formatting",
    (FailureType.SAFETY_MONOTONICITY, "shell-injection"): "pass argument lists to subprocess without shell=True",
    (FailureType.SAFETY_MONOTONICITY, "eval-exec"): "never evaluate dynamic strings with eval or exec",
    (FailureType.SAFETY_MONOTONICITY, "unsafe-deserialization"): "do not deserialize untrusted data with pickle or unsafe loaders",
    (FailureType.SAFETY_MONOTONICITY, "weak-hash"): "use SHA-256 or stronger instead of MD5/SHA-1",
    (FailureType.SAFETY_MONOTONICITY, "hardcoded-secret"): "read secrets from configuration or the environment, not literals",
    (FailureType.SAFETY_MONOTONICITY, "path-traversal"): "normalize and contain file paths before opening them",
    (FailureType.SAFETY_MONOTONICITY, "*"): "avoid code matching static-analysis rule {cls}",
    (FailureType.CORRECTNESS, "*"): "run the existing tests mentally before changing behavior they cover",
    (FailureType.DIFF_BUDGET, "*"): "keep each change small; split large rewrites into focused edits",
}


_CLASS_PRECEDENCE = {
    AnchorType.FUNCTION_SIGNATURE: 0,
    AnchorType.INVARIANT: 1,
    AnchorType.AST: 2,
    AnchorType.REGEX: 3,
    AnchorType.SUBSTRING: 4,
}


def lesson_text(failure_type: FailureType, selector_class: str) -> str:
    template = LESSON_TEMPLATES.get((failure_type, selector_class)) or LESSON_TEMPLATES[(failure_type, "*")]
    return template.format(cls=selector_class)


# ---------------------------------------------------------------------------
# counterexamples
# ---------------------------------------------------------------------------


def anchor_selector_class(label: str, anchor_type: AnchorType, source: str, library: Library) -> str:
    """Collapse an anchor to its family: name-rule family, guard, invariant id or pattern name."""
    if anchor_type is AnchorType.FUNCTION_SIGNATURE:
        short = label.rsplit(".", 1)[-1]
        family = library.name_family(short)
        if family:
            return family
        return "guard" if source == "guard-flow" else "api"
    if anchor_type is AnchorType.INVARIANT:
        return label
    return source or anchor_type.value


def _function_line(snapshot: CodeSnapshot, name: str) -> int | None:
    try:
        for f in parse_functions(snapshot):
            if name in (f.qualname, f.name):
                return f.line
    except ParseError:
        pass
    return None


def _regex_line(snapshot: CodeSnapshot, pattern: str) -> int | None:
    try:
        m = re.search(pattern, snapshot.source)
    except re.error:
        return None
    return snapshot.source.count("\n", 0, m.start()) + 1 if m else None


def _enclosing_name(snapshot: CodeSnapshot, line: int) -> str | None:
    if snapshot.language is not Language.PYTHON:
        for f in parse_functions(snapshot):
            if f.body_span[0] <= line <= f.body_span[1]:
                return f.name
        return None
    return enclosing_function(parse_module(snapshot.source), line)


def gen_counterexample(
    prev: CodeSnapshot,
    candidate: CodeSnapshot,
    report: GateReport,
    spec: SecuritySpec,
    *,
    iteration: int = 0,
    attempt: int = 0,
    library: Library | None = None,
) -> Counterexample:
    """Structured failure report for the first blocking layer of ``report``."""
    if report.decision is Decision.ACCEPT or report.failed_layer is None:
        raise ContractViolation("counterexamples are only generated for rejected candidates")
    library = library or default_library()
    layer = report.failed_layer
    failure = _LAYER_FAILURE[layer]
    locations: list[int] = []
    elements: list[str] = []
    selector_class = ""

    if report.diagnostic and report.verdict(layer) is GateVerdict.FAIL and failure is not FailureType.ANCHOR_VIOLATION:
        constraints = [report.diagnostic]
        message = f"{layer} layer could not be evaluated: {report.diagnostic}"
        selector_class = "backend"
    elif failure is FailureType.CORRECTNESS:
        if report.timed_out:
            constraints, message = ["timeout"], "the test suite timed out; the candidate may loop forever"
        else:
            constraints = list(report.failing_tests) or ["test suite"]
            message = "tests failed: " + ", ".join(constraints)
        selector_class = "tests"
    elif failure is FailureType.SAFETY_MONOTONICITY:
        rule_ids = list(dict.fromkeys(f.rule_id for f in report.new_findings))
        locations = sorted({f.line for f in report.new_findings})
        for line in locations:
            try:
                name = _enclosing_name(candidate, line)
            except ParseError:
                name = None
            if name:
                elements.append(name)
        if rule_ids:
            constraints = rule_ids
            where = "; ".join(f"{f.rule_id} at line {f.line}" for f in report.new_findings)
            message = f"the change introduces new static-analysis findings: {where}"
            selector_class = rule_ids[0]
        else:
            constraints = [f"delta_ch={report.delta_ch}", f"delta_rho={report.delta_rho}"]
            message = report.diagnostic or (
                f"vulnerability count changed by {report.delta_ch} and risk density by {report.delta_rho:.3f}"
            )
            selector_class = "risk-density"
    elif failure is FailureType.DIFF_BUDGET:
        constraints = list(report.budget_exceeded)
        message = "the change is too large: " + ", ".join(constraints)
        selector_class = "add-budget" if any(c.startswith("L_add") for c in constraints) else "del-budget"
    else:
        # the most specific anchor names the class: functions, then invariants, then patterns
        missing = sorted(
            (c for c in report.anchor_checks if c.verdict.blocking), key=lambda c: _CLASS_PRECEDENCE[c.anchor_type]
        )
        by_id = {a.anchor_id: a for a in spec.anchors}
        constraints = [c.selector for c in missing]
        parts = []
        for c in missing:
            anchor = by_id.get(c.anchor_id)
            source = anchor.source if anchor else ""
            if c.anchor_type is AnchorType.FUNCTION_SIGNATURE:
                name = parse_signature(c.selector)[0]
                elements.append(name.rsplit(".", 1)[-1])
                line = _function_line(prev, name)
                parts.append(f"anchor {c.label or name} missing: function {c.selector} was deleted or its required parameters changed")
            elif c.anchor_type is AnchorType.INVARIANT:
                elements.append(c.selector)
                line = None
                parts.append(f"anchor {c.selector} missing: the invariant no longer holds")
            else:
                elements.append(c.label or c.selector)
                line = _regex_line(prev, c.selector) if c.anchor_type is AnchorType.REGEX else None
                parts.append(f"anchor {c.label or c.selector} missing: the protected pattern was removed or weakened")
            if line:
                locations.append(line)
            if not selector_class:
                selector_class = anchor_selector_class(c.label or c.selector, c.anchor_type, source, library)
        message = "; ".join(parts)

    return Counterexample(
        failure_type=failure,
        violated_constraints=tuple(constraints),
        message=message,
        locations=tuple(sorted(set(locations))),
        elements=tuple(dict.fromkeys(elements)),
        selector_class=selector_class,
        iteration=iteration,
        attempt=attempt,
    )


# ---------------------------------------------------------------------------
# knowledge base
# ---------------------------------------------------------------------------


@dataclass
class KnowledgeBase:
    """Append-only store of counterexamples and the lessons distilled from them."""

    counterexamples: list[Counterexample] = field(default_factory=list)
    lessons: dict[tuple[str, str, str], LessonRule] = field(default_factory=dict)
    categories: list[Category | None] = field(default_factory=list)

    def lesson_list(self) -> tuple[LessonRule, ...]:
        return tuple(sorted(self.lessons.values(), key=lambda r: (r.created_at, r.text)))


def assimilate(
    ce: Counterexample,
    kb: KnowledgeBase,
    category: Category,
    *,
    k_lesson: int = K_LESSON,
    iteration: int | None = None,
) -> LessonRule | None:
    """Record ``ce``; return the lesson created or reinforced by it, if any."""
    kb.counterexamples.append(ce)
    kb.categories.append(category)
    when = ce.iteration if iteration is None else iteration
    same = sum(
        1
        for c, cat in zip(kb.counterexamples, kb.categories)
        if cat is category and c.signature == ce.signature
    )
    if same < k_lesson:
        return None
    key = (category.value, ce.failure_type.value, ce.selector_class)
    old = kb.lessons.get(key)
    if old is None:
        rule = LessonRule(
            text=lesson_text(ce.failure_type, ce.selector_class),
            category=category,
            failure_type=ce.failure_type,
            selector_class=ce.selector_class,
            occurrences=same,
            created_at=when,
            updated_at=when,
        )
    else:
        rule = dataclasses.replace(old, occurrences=same, updated_at=when)
    kb.lessons[key] = rule
    return rule


def retrieve_lessons(
    kb: KnowledgeBase | tuple[LessonRule, ...] | list[LessonRule],
    category: Category,
    failure_hint: FailureType | None = None,
    *,
    limit: int = N_LESSONS,
) -> list[LessonRule]:
    """Lessons tagged with ``category`` (and ``failure_hint``), newest first, capped."""
    rules = kb.lesson_list() if isinstance(kb, KnowledgeBase) else tuple(kb)
    matching = [
        r for r in rules if r.category is category and (failure_hint is None or r.failure_type is failure_hint)
    ]
    matching.sort(key=lambda r: (r.updated_at, r.created_at), reverse=True)
    return matching[:limit]


def iteration_feedback(
    iteration: int,
    committed: bool,
    accepted_violations: tuple[str, ...],
    counterexamples: list[Counterexample],
) -> IterationFeedback:
    return IterationFeedback(
        iteration=iteration,
        committed=committed,
        violated=accepted_violations,
        failure_elements=tuple(ce.elements for ce in counterexamples),
    )

