"""Language frontends: function inventories, LOC, line diffs, public interfaces."""

from __future__ import annotations

from anchorgate.errors import UnsupportedLanguage
from anchorgate.frontend import java as _java
from anchorgate.frontend import python as _python
from anchorgate.frontend.base import CallSite, FunctionInfo, Visibility
from anchorgate.frontend.lcs import BACKEND as LCS_BACKEND
from anchorgate.frontend.lcs import line_lcs
from anchorgate.frontend.loc import count_loc_text
from anchorgate.model import CodeSnapshot, DiffStats, Language

__all__ = [
    "CallSite",
    "FunctionInfo",
    "Visibility",
    "LCS_BACKEND",
    "parse_functions",
    "count_loc",
    "diff_stats",
    "diff_text",
    "public_interfaces",
]


def parse_functions(snapshot: CodeSnapshot) -> list[FunctionInfo]:
    if snapshot.language is Language.PYTHON:
        return list(_python.parse_functions(snapshot.source))
    if snapshot.language is Language.JAVA:
        return list(_java.parse_functions(snapshot.source))
    raise UnsupportedLanguage(str(snapshot.language))


def count_loc(snapshot: CodeSnapshot) -> int:
    return count_loc_text(snapshot.source, snapshot.language)


def diff_text(prev: str, curr: str) -> DiffStats:
    a, b = prev.splitlines(), curr.splitlines()
    common = line_lcs(a, b)
    return DiffStats(lines_added=len(b) - common, lines_deleted=len(a) - common)


def diff_stats(prev: CodeSnapshot, curr: CodeSnapshot) -> DiffStats:
    return diff_text(prev.source, curr.source)


def public_interfaces(snapshot: CodeSnapshot) -> frozenset[tuple[str, int]]:
    return frozenset((f.interface_name, f.arity) for f in parse_functions(snapshot) if f.is_public)
