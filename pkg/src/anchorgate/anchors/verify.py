"""Anchor verification, migration and feedback-driven adjustment."""

from __future__ import annotations

import dataclasses
from collections import Counter
from typing import Iterable, Sequence

from anchorgate.anchors.library import Library, default_library
from anchorgate.anchors.mining import anchor_present
from anchorgate.errors import NotFound, ParseError
from anchorgate.frontend import public_interfaces
from anchorgate.model import (
    INITIAL_TTL,
    Anchor,
    AnchorCheck,
    AnchorType,
    CodeSnapshot,
    GateVerdict,
    IterationFeedback,
    LockLevel,
    MigrationOutcome,
    MigrationRequest,
    SecuritySpec,
    Severity,
)

K_DOWNGRADE = 3
K_NEWANCHOR = 2
_STRUCTURAL = (AnchorType.AST, AnchorType.FUNCTION_SIGNATURE)


def missing_verdict(anchor: Anchor) -> GateVerdict:
    if anchor.lock_level is LockLevel.SOFT:
        return GateVerdict.WARN
    if anchor.priority is Severity.CRITICAL:
        return GateVerdict.FAIL
    if anchor.priority is Severity.HIGH:
        return GateVerdict.FAIL_RETRY
    return GateVerdict.WARN


def verify_anchors(
    candidate: CodeSnapshot,
    spec: SecuritySpec,
    library: Library | None = None,
) -> list[tuple[Anchor, GateVerdict]]:
    """One verdict per anchor: Pass when present, else by lock level and priority.

    An unparseable candidate fails every hard Ast/signature anchor with
    FailRetry, whatever its priority.
    """
    library = library or default_library()
    out = []
    for anchor in spec.anchors:
        try:
            present = anchor_present(anchor, candidate, library)
        except ParseError:
            if anchor.anchor_type in _STRUCTURAL and anchor.lock_level is LockLevel.HARD:
                out.append((anchor, GateVerdict.FAIL_RETRY))
            else:
                out.append((anchor, missing_verdict(anchor)))
            continue
        out.append((anchor, GateVerdict.PASS if present else missing_verdict(anchor)))
    return out


def to_checks(results: Iterable[tuple[Anchor, GateVerdict]]) -> tuple[AnchorCheck, ...]:
    return tuple(
        AnchorCheck(
            anchor_id=a.anchor_id,
            selector=a.selector,
            anchor_type=a.anchor_type,
            priority=a.priority,
            lock_level=a.lock_level,
            present=v is GateVerdict.PASS,
            verdict=v,
            label=a.label,
        )
        for a, v in results
    )


def process_migration(
    req: MigrationRequest,
    candidate: CodeSnapshot,
    spec: SecuritySpec,
    reference: CodeSnapshot | None = None,
    library: Library | None = None,
) -> tuple[SecuritySpec, MigrationOutcome]:
    """Move an anchor to ``req.new_selector`` if the candidate proves it safe.

    ``reference`` is the snapshot whose public interfaces must be preserved;
    without one the interface check is skipped.  Returns the (possibly
    unchanged) spec and the outcome with a rejection reason.
    """
    library = library or default_library()
    old = spec.find(req.old_anchor)
    if old is None:
        raise NotFound(f"no anchor {req.old_anchor!r}")

    def reject(reason: str) -> tuple[SecuritySpec, MigrationOutcome]:
        return spec, MigrationOutcome(req, False, reason)

    if old.priority is Severity.CRITICAL and not req.evidence.strip():
        return reject("critical anchor migration requires equivalence evidence")
    moved = dataclasses.replace(old, selector=req.new_selector, label="")
    if moved.key != old.key and any(a.key == moved.key for a in spec.anchors):
        return reject("new selector collides with an existing anchor")
    try:
        if not anchor_present(moved, candidate, library):
            return reject("new selector does not match the candidate")
        broken = [a.selector for a in spec.invariant_anchors if not anchor_present(a, candidate, library)]
        if broken:
            return reject(f"invariants violated: {', '.join(broken)}")
        if reference is not None and not public_interfaces(reference) <= public_interfaces(candidate):
            return reject("candidate drops a public interface")
    except ParseError as exc:
        return reject(f"candidate unparseable: {exc}")
    anchors = tuple(moved if a.key == old.key else a for a in spec.anchors)
    return dataclasses.replace(spec, anchors=anchors), MigrationOutcome(req, True, "")


def _downgrade(anchor: Anchor) -> Anchor:
    if anchor.priority is Severity.LOW:
        return dataclasses.replace(anchor, lock_level=LockLevel.SOFT, downgrades=anchor.downgrades + 1)
    lowered = anchor.priority.lowered()
    ttl = anchor.ttl_remaining if anchor.ttl_remaining is not None else INITIAL_TTL.get(lowered)
    return dataclasses.replace(anchor, priority=lowered, ttl_remaining=ttl, downgrades=anchor.downgrades + 1)


def apply_anchor_feedback(
    spec: SecuritySpec,
    history: Sequence[IterationFeedback],
    *,
    k_downgrade: int = K_DOWNGRADE,
    k_newanchor: int = K_NEWANCHOR,
    iteration: int = 0,
    snapshot: CodeSnapshot | None = None,
) -> SecuritySpec:
    """Relax anchors that keep being overridden and anchor recurring failure elements.

    Every ``k_downgrade`` committed iterations that let an anchor's violation
    through lower it one level (Low turns Soft).  An element named by at
    least ``k_newanchor`` counterexamples and not yet anchored becomes a new
    Medium substring anchor, provided it occurs in ``snapshot`` when given.
    """
    if not history:
        return spec
    overridden = Counter(aid for h in history if h.committed for aid in set(h.violated))
    anchors = []
    for a in spec.anchors:
        target = overridden.get(a.anchor_id, 0) // k_downgrade
        while a.downgrades < target and not (a.priority is Severity.LOW and a.lock_level is LockLevel.SOFT):
            a = _downgrade(a)
        anchors.append(a)

    mentions = Counter(e for h in history for elems in h.failure_elements for e in set(elems))
    known = {a.selector for a in anchors} | {a.label for a in anchors if a.label}
    for element, n in sorted(mentions.items()):
        if n < k_newanchor or not element or any(element in k for k in known):
            continue
        if snapshot is not None and element not in snapshot.source:
            continue
        anchors.append(
            Anchor(
                anchor_type=AnchorType.SUBSTRING,
                selector=element,
                priority=Severity.MEDIUM,
                created_iteration=iteration,
                ttl_remaining=INITIAL_TTL[Severity.MEDIUM],
                label=element,
                source="feedback",
            )
        )
        known.add(element)
    return dataclasses.replace(spec, anchors=tuple(anchors))
