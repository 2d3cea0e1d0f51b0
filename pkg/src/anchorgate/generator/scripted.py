"""Deterministic scenario-driven generator standing in for the language model.

Scenario files are YAML::

    iterations:
      1:                          # task index, starting at 1
        tags: [deletes-validation]
        candidates:               # attempt 0, attempt 1, ...
          - edits:
              - {find: "old text", replace: "new text"}
          - source: |
              ...full program...
        repaired: {edits: [...]}  # chosen once feedback reaches the generator
        repair_when: validate     # optional: feedback must contain this text
        guided: {edits: [...]}    # chosen when a hard anchor mentions guided_when
        guided_when: execute
        refined: {edits: [...]}   # chosen on a self-refine pass
        critique: "..."           # self-critique text returned for this iteration
        migrate:
          - {anchor: validate_user_input, to: "check_user_input(name)", evidence: "..."}
    default: {candidates: [{edits: []}]}   # used for iterations not listed

A variant is either ``source`` (verbatim program) or ``edits`` applied to
the current program: ``find``/``replace`` pairs (``find`` must occur) plus
optional ``append`` and ``prepend`` text.  Feedback means the rendered last
counterexample, the lesson texts and any critique.  Without ``repair_when``
only a counterexample triggers the repaired variant; with it, matching
lesson text alone also does (lessons prevent a repeat of the mistake).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from anchorgate.errors import ScenarioError, ScenarioExhausted
from anchorgate.generator.base import GenerationRequest
from anchorgate.model import CodeSnapshot, LockLevel, MigrationRequest


@dataclass(frozen=True)
class Variant:
    source: str | None = None
    edits: tuple[tuple[str, str], ...] = ()
    append: str = ""
    prepend: str = ""

    def apply(self, current: str) -> str:
        if self.source is not None:
            return self.source
        text = current
        for find, replace in self.edits:
            if find not in text:
                raise ScenarioError(f"scripted edit target not found: {find[:60]!r}")
            text = text.replace(find, replace, 1)
        if self.prepend:
            text = self.prepend + text
        if self.append:
            text = text + ("" if text.endswith("\n") or not text else "\n") + self.append
        return text


@dataclass(frozen=True)
class ScenarioStep:
    candidates: tuple[Variant, ...]
    tags: tuple[str, ...] = ()
    repaired: Variant | None = None
    repair_when: str | None = None
    guided: Variant | None = None
    guided_when: str | None = None
    refined: Variant | None = None
    critique: str = ""
    migrate: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("a scenario step needs at least one candidate")


@dataclass(frozen=True)
class Scenario:
    iterations: dict[int, ScenarioStep] = field(default_factory=dict)
    default: ScenarioStep | None = None

    def step(self, iteration: int) -> ScenarioStep:
        found = self.iterations.get(iteration, self.default)
        if found is None:
            raise ScenarioExhausted(f"scenario has no entry for iteration {iteration}")
        return found

    def tags(self, iteration: int) -> tuple[str, ...]:
        step = self.iterations.get(iteration, self.default)
        return step.tags if step else ()

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        try:
            its = {int(k): _step(v) for k, v in (raw.get("iterations") or {}).items()}
            default = _step(raw["default"]) if raw.get("default") else None
        except (TypeError, KeyError, ValueError, AttributeError) as exc:
            raise ScenarioError(f"malformed scenario: {exc}") from exc
        return cls(its, default)

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        try:
            raw = yaml.safe_load(Path(path).read_text("utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
        return cls.from_dict(raw)


def _variant(raw) -> Variant:
    if isinstance(raw, str):
        return Variant(source=raw)
    edits = tuple((str(e["find"]), str(e.get("replace", ""))) for e in raw.get("edits") or ())
    return Variant(
        source=raw.get("source"),
        edits=edits,
        append=raw.get("append", "") or "",
        prepend=raw.get("prepend", "") or "",
    )


def _step(raw: dict) -> ScenarioStep:
    return ScenarioStep(
        candidates=tuple(_variant(c) for c in raw.get("candidates") or ()),
        tags=tuple(raw.get("tags") or ()),
        repaired=_variant(raw["repaired"]) if raw.get("repaired") is not None else None,
        repair_when=raw.get("repair_when"),
        guided=_variant(raw["guided"]) if raw.get("guided") is not None else None,
        guided_when=raw.get("guided_when"),
        refined=_variant(raw["refined"]) if raw.get("refined") is not None else None,
        critique=raw.get("critique", "") or "",
        migrate=tuple((str(m["anchor"]), str(m["to"]), str(m.get("evidence", ""))) for m in raw.get("migrate") or ()),
    )


class ScriptedGenerator:
    name = "scripted"

    def __init__(self, scenario: Scenario):
        self.scenario = scenario

    def select(self, req: GenerationRequest) -> Variant:
        step = self.scenario.step(req.iteration)
        lessons = " ".join(r.text for r in req.lessons)
        if step.repaired is not None:
            if req.last_counterexample is not None:
                feedback = " ".join((req.last_counterexample.render(), *req.last_counterexample.violated_constraints, lessons))
                if step.repair_when is None or step.repair_when in feedback:
                    return step.repaired
            elif step.repair_when is not None and step.repair_when in lessons:
                return step.repaired
        if req.critique and step.refined is not None:
            return step.refined
        if step.guided is not None and step.guided_when:
            hard = " ".join(f"{a.selector} {a.label}" for a in req.spec.anchors if a.lock_level is LockLevel.HARD)
            if step.guided_when in hard:
                return step.guided
        if req.attempt_index >= len(step.candidates):
            raise ScenarioExhausted(f"iteration {req.iteration} has no candidate for attempt {req.attempt_index}")
        return step.candidates[req.attempt_index]

    def generate(self, req: GenerationRequest) -> CodeSnapshot:
        source = self.select(req).apply(req.current.source)
        return CodeSnapshot(source, req.current.language, req.iteration)

    def critique(self, req: GenerationRequest, candidate: CodeSnapshot) -> str:
        return self.scenario.step(req.iteration).critique

    def migrations(self, req: GenerationRequest) -> list[MigrationRequest]:
        step = self.scenario.step(req.iteration)
        return [MigrationRequest(a, to, ev, req.iteration) for a, to, ev in step.migrate]
