"""Anchor mining at function, pattern and invariant level, with TTL bookkeeping."""

from __future__ import annotations

import ast
import dataclasses
import fnmatch
import re

from anchorgate.anchors.invariants import Context, applicable, check_invariant
from anchorgate.anchors.library import Library, PatternDef, default_library
from anchorgate.errors import ParseError
from anchorgate.frontend import FunctionInfo, parse_functions
from anchorgate.frontend.python import dotted_name, parse_module
from anchorgate.model import (
    INITIAL_TTL,
    Anchor,
    AnchorType,
    Category,
    CodeSnapshot,
    Language,
    LockLevel,
    SecuritySpec,
    Severity,
)

GUARD_CONFIDENCE = 0.8
_TYPE_ORDER = {t: i for i, t in enumerate(AnchorType)}
_SIGNATURE = re.compile(r"^\s*([\w.$]+)\s*\((.*)\)\s*$")


# ---------------------------------------------------------------------------
# selectors
# ---------------------------------------------------------------------------


def signature_selector(f: FunctionInfo) -> str:
    return f"{f.qualname}({', '.join(f.required_parameters)})"


def parse_signature(selector: str) -> tuple[str, tuple[str, ...]]:
    m = _SIGNATURE.match(selector)
    if not m:
        return selector.strip(), ()
    params = tuple(p.strip() for p in m.group(2).split(",") if p.strip())
    return m.group(1), params


def snippet_regex(snippet: str) -> str:
    """Escaped form of ``snippet`` that tolerates whitespace reflow."""
    return r"\s+".join(re.escape(part) for part in snippet.split())


# ---------------------------------------------------------------------------
# guard-flow detection
# ---------------------------------------------------------------------------


def detect_guard_functions(
    functions: list[FunctionInfo],
    snapshot: CodeSnapshot,
    library: Library | None = None,
) -> list[FunctionInfo]:
    """Branching file-local functions sitting between a public entry and a sink.

    A function f qualifies when some g reachable from a public entry calls f,
    f branches or raises, and the data reaching the sink is tied to f's
    parameters: either g later passes an identifier it handed to f into a
    sink call, or f itself feeds one of its parameters to a sink.
    """
    library = library or default_library()
    ctx = Context(snapshot, functions, library)
    by_name = {f.name: f for f in functions}
    lang = snapshot.language

    reachable: set[str] = set()
    frontier = [f.name for f in functions if f.is_public]
    while frontier:
        name = frontier.pop()
        if name in reachable:
            continue
        reachable.add(name)
        for c in by_name[name].calls:
            target = ctx.resolve(c)
            if target is not None:
                frontier.append(target.name)

    def feeds_sink_itself(f: FunctionInfo) -> bool:
        params = set(f.parameter_names)
        return any(library.sink_class(c.name, lang) and c.identifiers & params for c in f.calls)

    found: dict[str, FunctionInfo] = {}
    for g_name in sorted(reachable):
        g = by_name[g_name]
        sinks = [c for c in g.calls if library.sink_class(c.name, lang)]
        for c in g.calls:
            f = ctx.resolve(c)
            if f is None or f.name == g.name or not f.contains_branch_or_raise:
                continue
            downstream = any(s.line >= c.line and s is not c and s.identifiers & c.identifiers for s in sinks)
            if downstream or feeds_sink_itself(f):
                found.setdefault(f.name, f)
    return [f for f in functions if f.name in found]


# ---------------------------------------------------------------------------
# presence
# ---------------------------------------------------------------------------


def _ast_template_present(template: str, snapshot: CodeSnapshot) -> bool:
    kind, _, glob = template.partition(":")
    if snapshot.language is Language.PYTHON:
        tree = parse_module(snapshot.source)
        if kind == "call":
            return any(
                isinstance(n, ast.Call) and fnmatch.fnmatchcase(dotted_name(n.func), glob) for n in ast.walk(tree)
            )
        if kind == "with-call":
            return any(
                isinstance(n, (ast.With, ast.AsyncWith))
                and any(
                    isinstance(i.context_expr, ast.Call) and fnmatch.fnmatchcase(dotted_name(i.context_expr.func), glob)
                    for i in n.items
                )
                for n in ast.walk(tree)
            )
        return False
    if kind == "call":
        return any(fnmatch.fnmatchcase(c.name, glob) for f in parse_functions(snapshot) for c in f.calls)
    return False


def _signature_present(selector: str, snapshot: CodeSnapshot) -> bool:
    name, required = parse_signature(selector)
    for f in parse_functions(snapshot):
        if name in (f.qualname, f.name) and set(required) <= set(f.parameter_names):
            return True
    return False


def anchor_present(anchor: Anchor, snapshot: CodeSnapshot, library: Library | None = None) -> bool:
    """Whether ``anchor`` is matched in ``snapshot``.

    Ast and signature anchors raise ParseError on unparseable code; invariant
    anchors are present when their rule-base check reports no violation.
    """
    kind = anchor.anchor_type
    if kind is AnchorType.SUBSTRING:
        return anchor.selector in snapshot.source
    if kind is AnchorType.REGEX:
        try:
            return re.search(anchor.selector, snapshot.source) is not None
        except re.error:
            return False
    if kind is AnchorType.AST:
        return _ast_template_present(anchor.selector, snapshot)
    if kind is AnchorType.FUNCTION_SIGNATURE:
        return _signature_present(anchor.selector, snapshot)
    if not applicable(anchor.selector, snapshot.language):
        return True
    return not check_invariant(anchor.selector, snapshot, library or default_library())


# ---------------------------------------------------------------------------
# mining
# ---------------------------------------------------------------------------


def _make(kind: AnchorType, selector: str, priority: Severity, iteration: int, **kw) -> Anchor:
    return Anchor(
        anchor_type=kind,
        selector=selector,
        priority=priority,
        created_iteration=iteration,
        ttl_remaining=INITIAL_TTL.get(priority),
        **kw,
    )


def _function_anchors(snapshot: CodeSnapshot, library: Library, iteration: int) -> list[Anchor]:
    functions = parse_functions(snapshot)
    guards = {f.name for f in detect_guard_functions(functions, snapshot, library)}
    out = []
    for f in functions:
        if library.name_family(f.name):
            source, confidence = "name-rule", 1.0
        elif f.name in guards:
            source, confidence = "guard-flow", GUARD_CONFIDENCE
        elif f.is_public:
            source, confidence = "public-api", 1.0
        else:
            continue
        out.append(
            _make(
                AnchorType.FUNCTION_SIGNATURE,
                signature_selector(f),
                Severity.HIGH,
                iteration,
                confidence=confidence,
                label=f.qualname,
                source=source,
            )
        )
    return out


def _pattern_anchors(p: PatternDef, snapshot: CodeSnapshot, iteration: int) -> list[Anchor]:
    lock = LockLevel.SOFT if p.soft else LockLevel.HARD
    if p.kind == "ast":
        return [
            _make(AnchorType.AST, t, p.priority, iteration, lock_level=lock, label=p.name, source=p.name)
            for t in p.templates
            if _ast_template_present(t, snapshot)
        ]
    seen: dict[str, None] = {}
    for m in re.finditer(p.pattern, snapshot.source):
        seen.setdefault(" ".join(m.group(0).split()), None)
    return [
        _make(AnchorType.REGEX, snippet_regex(s), p.priority, iteration, lock_level=lock, label=s, source=p.name)
        for s in seen
    ]


def _promote(anchor: Anchor, library: Library) -> Anchor:
    if anchor.priority is not Severity.CRITICAL and (
        anchor.selector in library.critical_selectors or anchor.label in library.critical_selectors
    ):
        return dataclasses.replace(anchor, priority=Severity.CRITICAL, ttl_remaining=None)
    return anchor


def mine_anchors(
    snapshot: CodeSnapshot,
    category: Category | None = None,
    prior: SecuritySpec | None = None,
    *,
    iteration: int | None = None,
    library: Library | None = None,
) -> SecuritySpec:
    """Mine the security specification for ``snapshot`` and merge it with ``prior``.

    Prior anchors that still match keep their attributes and get a fresh TTL.
    Unmatched Critical/High anchors persist; unmatched Medium/Low anchors lose
    one TTL step and disappear at zero.
    """
    library = library or default_library()
    iteration = snapshot.iteration_index if iteration is None else iteration
    lang = snapshot.language

    fresh: dict[tuple[str, str], Anchor] = {}

    def add(anchor: Anchor) -> None:
        fresh.setdefault(anchor.key, _promote(anchor, library))

    for a in _function_anchors(snapshot, library, iteration):
        add(a)
    for p in library.patterns_for(lang):
        for a in _pattern_anchors(p, snapshot, iteration):
            add(a)
    rule_base = tuple(inv.id for inv in library.invariants_for(category) if applicable(inv.id, lang))
    for inv_id in rule_base:
        if not check_invariant(inv_id, snapshot, library):
            critical = library.invariant(inv_id).critical
            add(
                _make(
                    AnchorType.INVARIANT,
                    inv_id,
                    Severity.CRITICAL if critical else Severity.HIGH,
                    iteration,
                    label=inv_id,
                    source="invariant",
                )
            )

    merged: dict[tuple[str, str], Anchor] = {}
    for old in prior.anchors if prior else ():
        if old.key in fresh:
            merged[old.key] = old.with_fresh_ttl()
            continue
        try:
            present = anchor_present(old, snapshot, library)
        except ParseError:
            present = False
        if present:
            merged[old.key] = old.with_fresh_ttl()
        elif old.priority in (Severity.CRITICAL, Severity.HIGH):
            merged[old.key] = old
        else:
            ttl = (old.ttl_remaining if old.ttl_remaining is not None else INITIAL_TTL[old.priority]) - 1
            if ttl > 0:
                merged[old.key] = dataclasses.replace(old, ttl_remaining=ttl)
    for key, a in fresh.items():
        merged.setdefault(key, a)

    anchors = sorted(merged.values(), key=lambda a: (_TYPE_ORDER[a.anchor_type], a.selector))
    return SecuritySpec(anchors=tuple(anchors), rule_base=rule_base, category=category)
