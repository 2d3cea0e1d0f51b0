"""LCS kernel selection.

The compiled extension is used when it was built; ``ANCHORGATE_PURE=1``
forces the pure-Python implementation.
"""

import os

from anchorgate.frontend._lcs_py import lcs_length as lcs_length_py

try:
    if os.environ.get("ANCHORGATE_PURE") == "1":
        raise ImportError("pure implementation requested")
    from anchorgate.frontend._lcs_ext import lcs_length as lcs_length_ext
except ImportError:
    lcs_length_ext = None

lcs_length = lcs_length_ext or lcs_length_py
BACKEND = "cython" if lcs_length_ext is not None else "python"


def line_lcs(prev_lines: list[str], curr_lines: list[str]) -> int:
    """LCS length of two line lists, trimming the common prefix and suffix first."""
    start = 0
    limit = min(len(prev_lines), len(curr_lines))
    while start < limit and prev_lines[start] == curr_lines[start]:
        start += 1
    end = 0
    while (
        end < limit - start
        and prev_lines[len(prev_lines) - 1 - end] == curr_lines[len(curr_lines) - 1 - end]
    ):
        end += 1
    a = prev_lines[start : len(prev_lines) - end]
    b = curr_lines[start : len(curr_lines) - end]
    ids: dict[str, int] = {}
    xa = [ids.setdefault(line, len(ids)) for line in a]
    xb = [ids.setdefault(line, len(ids)) for line in b]
    return start + end + lcs_length(xa, xb)
