"""Request type and backend protocol shared by candidate generators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

from anchorgate.model import CodeSnapshot, Counterexample, LessonRule, MigrationRequest, RefinementTask, SecuritySpec


@dataclass(frozen=True)
class GenerationRequest:
    current: CodeSnapshot
    task: RefinementTask
    spec: SecuritySpec = field(default_factory=SecuritySpec)
    lessons: tuple[LessonRule, ...] = ()
    attempt_index: int = 0
    last_counterexample: Counterexample | None = None
    iteration: int = 1
    guidance: str = ""  # mode-specific preamble (security prompting)
    critique: str = ""  # self-critique text for a refine pass
    r_max: int = 3

    def __post_init__(self):
        if not 0 <= self.attempt_index < self.r_max:
            raise ValueError(f"attempt_index {self.attempt_index} outside [0, {self.r_max})")


@runtime_checkable
class Generator(Protocol):
    name: str

    def generate(self, req: GenerationRequest) -> CodeSnapshot: ...

    def critique(self, req: GenerationRequest, candidate: CodeSnapshot) -> str: ...

    def migrations(self, req: GenerationRequest) -> list[MigrationRequest]: ...
