"""Comment- and blank-aware line counting."""

from __future__ import annotations

import typing

if typing.TYPE_CHECKING:
    from anchorgate.model import Language


def count_loc_text(source: str, language: "Language | str") -> int:
    """Count lines that are neither blank nor start with a comment.

    Python: a line whose first non-blank character is ``#``.  Java: a line
    starting with ``//`` or ``/*``, or any line that begins inside an open
    block comment.
    """
    lang = getattr(language, "value", language)
    count = 0
    if lang == "python":
        for line in source.splitlines():
            stripped = line.strip()
            if stripped and not stripped.startswith("#"):
                count += 1
        return count
    in_block = False
    for line in source.splitlines():
        stripped = line.strip()
        starts_in_block = in_block
        in_block = _java_block_state(stripped, in_block)
        if not stripped or starts_in_block:
            continue
        if stripped.startswith("//") or stripped.startswith("/*"):
            continue
        count += 1
    return count


def _java_block_state(line: str, in_block: bool) -> bool:
    """Return whether a ``/* */`` comment is still open after ``line``."""
    i = 0
    in_str: str | None = None
    while i < len(line):
        ch = line[i]
        two = line[i : i + 2]
        if in_block:
            if two == "*/":
                in_block = False
                i += 2
                continue
        elif in_str:
            if ch == "\\":
                i += 2
                continue
            if ch == in_str:
                in_str = None
        elif two == "//":
            break
        elif two == "/*":
            in_block = True
            i += 2
            continue
        elif ch in "\"'":
            in_str = ch
        i += 1
    return in_block
