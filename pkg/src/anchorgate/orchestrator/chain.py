"""One iteration chain: mine, generate, gate, retry or roll back, commit, review."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from anchorgate.anchors import (
    Library,
    apply_anchor_feedback,
    default_library,
    mine_anchors,
    process_migration,
    to_checks,
    verify_anchors,
)
from anchorgate.assimilator import KnowledgeBase, assimilate, gen_counterexample, iteration_feedback, retrieve_lessons
from anchorgate.errors import (
    BaselineInvalid,
    GenerationError,
    GenerationUnavailable,
    NotFound,
    ParseError,
    ReviewUnavailable,
)
from anchorgate.frontend import diff_stats
from anchorgate.gate import GateContext, run_gate
from anchorgate.generator.base import GenerationRequest, Generator
from anchorgate.model import (
    AttemptRecord,
    Category,
    ChainRecord,
    ChainStatus,
    CodeSnapshot,
    Counterexample,
    Decision,
    GateVerdict,
    IterationFeedback,
    IterationRecord,
    LockLevel,
    MigrationOutcome,
    Outcome,
    RefinementTask,
    SecuritySpec,
    Strategy,
)
from anchorgate.orchestrator.config import MODES, RunConfig
from anchorgate.review import Reviewer, review
from anchorgate.sast import analyze


@dataclass
class ChainInputs:
    """Everything a chain needs besides the config; built by the suite runner."""

    chain_id: str
    baseline: CodeSnapshot
    tasks: list[RefinementTask]
    category: Category
    generator: Generator
    gate: GateContext
    strategy: Strategy | None = None
    sample_id: str = ""
    reviewer: Reviewer | None = None
    kb: KnowledgeBase | None = None
    library: Library | None = None
    check_baseline: bool = True
    events: list[str] = field(default_factory=list)


def _counts(snapshot: CodeSnapshot, ctx: GateContext) -> CodeSnapshot:
    _, profile = analyze(snapshot, ctx.analyzer, ctx.weights)
    return snapshot.with_counts(profile.counts)


def _fresh_coverage(snapshot: CodeSnapshot, spec: SecuritySpec, category: Category, library: Library) -> float | None:
    """Share of freshly detectable security elements that the spec protects with a hard anchor."""
    fresh = {a.key for a in mine_anchors(snapshot, category, None, library=library).anchors}
    if not fresh:
        return None
    hard = {a.key for a in spec.anchors if a.lock_level is LockLevel.HARD}
    return len(fresh & hard) / len(fresh)


def run_chain(inputs: ChainInputs, cfg: RunConfig) -> ChainRecord:
    """Run every task of the chain and return its record.

    Rejected candidates leave only their attempt records behind; the
    committed program changes solely on an accepted candidate.
    """
    if not inputs.tasks:
        raise ValueError("a chain needs at least one task")
    profile = MODES[cfg.mode]
    library = inputs.library or default_library()
    ctx = inputs.gate
    ctx.library = library
    events = inputs.events
    gate_cfg = cfg.gate

    if inputs.check_baseline and ctx.harness is not None:
        result = ctx.runner.run(inputs.baseline, ctx.harness)
        if not result.passed:
            raise BaselineInvalid(f"{inputs.chain_id}: baseline fails its own tests: {result.failing_tests}")

    baseline = _counts(inputs.baseline, ctx)
    baseline_review = _review(inputs, baseline, "baseline", events)

    kb = inputs.kb if inputs.kb is not None else KnowledgeBase()
    kb_start = len(kb.counterexamples)
    spec = SecuritySpec(category=inputs.category)
    history: list[IterationFeedback] = []
    current = baseline
    iterations: list[IterationRecord] = []
    status = ChainStatus.COMPLETE

    for index, task in enumerate(inputs.tasks, start=1):
        if profile.mine:
            spec = mine_anchors(current, inputs.category, spec, iteration=index, library=library)
            if profile.assimilate:
                spec = apply_anchor_feedback(
                    spec,
                    history,
                    k_downgrade=cfg.k_downgrade,
                    k_newanchor=cfg.k_newanchor,
                    iteration=index,
                    snapshot=current,
                )
            events.append(f"iter {index}: mined {len(spec.anchors)} anchors")
        lessons = tuple(retrieve_lessons(kb, inputs.category, limit=cfg.n_lessons)) if profile.assimilate else ()
        gate_spec = spec if profile.enforce_anchors else SecuritySpec(category=inputs.category)

        attempts: list[AttemptRecord] = []
        raised: list[Counterexample] = []
        last_ce: Counterexample | None = None
        committed: CodeSnapshot | None = None
        accepted_violations: tuple[str, ...] = ()
        unavailable = 0

        for k in range(gate_cfg.r_max):
            req = GenerationRequest(
                current=current,
                task=task,
                spec=spec if profile.mine else SecuritySpec(category=inputs.category),
                lessons=lessons,
                attempt_index=k,
                last_counterexample=last_ce if profile.feedback else None,
                iteration=index,
                guidance=profile.guidance,
                r_max=gate_cfg.r_max,
            )
            events.append(f"iter {index} attempt {k}: generate")
            try:
                candidate = inputs.generator.generate(req)
                if profile.self_refine:
                    critique = inputs.generator.critique(req, candidate)
                    events.append(f"iter {index} attempt {k}: self-critique")
                    candidate = inputs.generator.generate(dataclasses.replace(req, critique=critique or "no issues"))
            except GenerationError as exc:
                events.append(f"iter {index} attempt {k}: generation failed: {exc}")
                attempts.append(AttemptRecord(k, "", False, generation_error=f"{type(exc).__name__}: {exc}"))
                if isinstance(exc, GenerationUnavailable):
                    unavailable += 1
                    if not exc.retryable:
                        status = ChainStatus.INCOMPLETE
                        break
                continue

            migrations: list[MigrationOutcome] = []
            if profile.mine:
                for mreq in inputs.generator.migrations(req):
                    try:
                        spec, outcome = process_migration(mreq, candidate, spec, reference=current, library=library)
                    except NotFound as exc:
                        outcome = MigrationOutcome(mreq, False, str(exc))
                    migrations.append(outcome)
                    events.append(f"iter {index} attempt {k}: migration {mreq.old_anchor} -> {mreq.new_selector}: "
                                  f"{'accepted' if outcome.accepted else 'rejected ' + outcome.reason}")
                if profile.enforce_anchors:
                    gate_spec = spec

            anchor_checks = ()
            if profile.mine:
                anchor_checks = to_checks(verify_anchors(candidate, spec, library))
            violations = tuple(
                c.anchor_id for c in anchor_checks if c.lock_level is LockLevel.HARD and c.verdict is not GateVerdict.PASS
            )

            try:
                candidate = _counts(candidate, ctx)
            except ParseError as exc:
                if not profile.gated:
                    events.append(f"iter {index} attempt {k}: unparseable candidate discarded")
                    attempts.append(
                        AttemptRecord(k, candidate.digest, False, generation_error=f"ParseError: {exc}",
                                      anchor_violations=violations, anchors_checked=profile.mine,
                                      migrations=tuple(migrations))
                    )
                    continue
            diff = diff_stats(current, candidate)
            if not profile.gated:
                attempts.append(
                    AttemptRecord(k, candidate.digest, True, diff=diff, counts=candidate.severity_counts,
                                  anchor_violations=violations, anchors_checked=profile.mine,
                                  migrations=tuple(migrations))
                )
                committed, accepted_violations = candidate, violations
                break

            report = run_gate(current, candidate, gate_spec, gate_cfg, ctx=ctx, layers=profile.layers, attempt_index=k)
            events.append(f"iter {index} attempt {k}: gate {report.decision.value}"
                          + (f" ({report.failed_layer})" if report.failed_layer else ""))
            if report.decision is Decision.ACCEPT and candidate.severity_counts is None:
                events.append(f"iter {index} attempt {k}: unparseable candidate discarded")
                attempts.append(AttemptRecord(k, candidate.digest, False, report=report, diff=diff,
                                              generation_error="ParseError: candidate cannot be analyzed",
                                              anchor_violations=violations, anchors_checked=profile.mine))
                continue
            if report.decision is Decision.ACCEPT:
                attempts.append(
                    AttemptRecord(k, candidate.digest, True, report=report, diff=diff, counts=candidate.severity_counts,
                                  anchor_violations=violations, anchors_checked=profile.mine,
                                  migrations=tuple(migrations))
                )
                committed, accepted_violations = candidate, violations
                break
            ce = gen_counterexample(current, candidate, report, gate_spec, iteration=index, attempt=k, library=library)
            raised.append(ce)
            if profile.assimilate:
                lesson = assimilate(ce, kb, inputs.category, k_lesson=cfg.k_lesson, iteration=index)
                if lesson is not None:
                    events.append(f"iter {index} attempt {k}: lesson '{lesson.text}' x{lesson.occurrences}")
            attempts.append(
                AttemptRecord(k, candidate.digest, False, report=report, diff=diff, counts=candidate.severity_counts,
                              counterexample=ce, anchor_violations=violations, anchors_checked=profile.mine,
                              migrations=tuple(migrations))
            )
            last_ce = ce
            if report.decision is Decision.ROLLBACK:
                break

        if status is ChainStatus.INCOMPLETE or (unavailable and unavailable == len(attempts) == gate_cfg.r_max):
            status = ChainStatus.INCOMPLETE
            events.append(f"iter {index}: generator unavailable, chain aborted")
            if committed is None:
                break

        history.append(iteration_feedback(index, committed is not None, accepted_violations, raised))
        coverage = _fresh_coverage(current, spec, inputs.category, library) if profile.mine else None
        if committed is not None:
            iterations.append(
                IterationRecord(index, task, tuple(attempts), Outcome.COMMITTED, current.severity_counts,
                                committed.severity_counts, committed, len(spec.anchors), coverage,
                                tuple(r.text for r in lessons))
            )
            events.append(f"iter {index}: committed")
            current = committed
        else:
            iterations.append(
                IterationRecord(index, task, tuple(attempts), Outcome.ROLLED_BACK, current.severity_counts,
                                current.severity_counts, None, len(spec.anchors), coverage,
                                tuple(r.text for r in lessons))
            )
            events.append(f"iter {index}: rolled back")
        if status is ChainStatus.INCOMPLETE:
            break

    final_review = _review(inputs, current, "final", events) if baseline_review is not None else None
    return ChainRecord(
        chain_id=inputs.chain_id,
        baseline=baseline,
        iterations=tuple(iterations),
        baseline_review=baseline_review,
        final_review=final_review,
        config_fingerprint=cfg.fingerprint(),
        sample_id=inputs.sample_id,
        mode=cfg.mode,
        strategy=inputs.strategy,
        category=inputs.category,
        status=status,
        anchors_enabled=profile.mine,
        knowledge=tuple(kb.counterexamples[kb_start:]) if profile.assimilate else (),
        lessons=kb.lesson_list() if profile.assimilate else (),
        final_spec=spec if profile.mine else None,
        events=tuple(events),
    )


def _review(inputs: ChainInputs, snapshot: CodeSnapshot, which: str, events: list[str]):
    if inputs.reviewer is None:
        return None
    events.append(f"review {which}")
    try:
        return review(snapshot, inputs.reviewer)
    except ReviewUnavailable as exc:
        events.append(f"review {which} unavailable: {exc}")
        return None
