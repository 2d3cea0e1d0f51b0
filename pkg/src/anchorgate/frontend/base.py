from __future__ import annotations

import enum
from dataclasses import dataclass


class Visibility(enum.Enum):
    PUBLIC = "public"
    NON_PUBLIC = "non_public"


@dataclass(frozen=True)
class CallSite:
    """A call expression: dotted callee name plus the identifiers in each argument."""

    name: str
    line: int
    args: tuple[frozenset[str], ...] = ()

    @property
    def short_name(self) -> str:
        return self.name.rsplit(".", 1)[-1]

    @property
    def identifiers(self) -> frozenset[str]:
        out: set[str] = set()
        for a in self.args:
            out |= a
        return frozenset(out)


@dataclass(frozen=True)
class FunctionInfo:
    name: str
    parameter_names: tuple[str, ...]
    visibility: Visibility
    body_span: tuple[int, int]
    contains_branch_or_raise: bool
    called_names: tuple[str, ...] = ()
    calls: tuple[CallSite, ...] = ()
    required_parameters: tuple[str, ...] = ()
    qualname: str = ""
    line: int = 0

    def __post_init__(self):
        start, end = self.body_span
        if end < start or start < 1:
            raise ValueError(f"empty body span for {self.name}")
        names = [p.lstrip("*") for p in self.parameter_names]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate parameter in {self.name}")

    @property
    def is_public(self) -> bool:
        return self.visibility is Visibility.PUBLIC

    @property
    def arity(self) -> int:
        return sum(1 for p in self.parameter_names if not p.startswith("*"))

    @property
    def interface_name(self) -> str:
        return self.qualname or self.name
