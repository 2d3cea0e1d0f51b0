"""Lightweight Java frontend.

This is not a Java grammar.  It masks comments and literals, tracks braces to
tell class bodies from method bodies, and recognizes method headers, call
expressions, and branching keywords.  That is all the anchor engine and the
analyzers consume.
"""

from __future__ import annotations

import re
from functools import lru_cache

from anchorgate.errors import ParseError
from anchorgate.frontend.base import CallSite, FunctionInfo, Visibility

KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue default do
    double else enum extends final finally float for goto if implements import instanceof int
    interface long native new package private protected public return short static strictfp
    super switch synchronized this throw throws transient try void volatile while var record
    true false null""".split()
)
_CONTROL = frozenset({"if", "for", "while", "switch", "catch", "synchronized", "return", "new", "else", "try", "do", "throw"})

_ANNOTATION = re.compile(r"@[\w.]+(?:\s*\([^()]*\))?")
_HEADER = re.compile(
    r"""^(?P<mods>(?:(?:public|protected|private|static|final|abstract|synchronized|native|default|strictfp)\s+)*)
        (?:<[^<>]*(?:<[^<>]*>[^<>]*)*>\s*)?
        (?:(?P<ret>[\w$.\[\]<>?,\s]+?)\s+)?
        (?P<name>[A-Za-z_$][\w$]*)\s*\((?P<params>[^()]*)\)\s*
        (?:throws\s+[\w$.,\s]+)?$""",
    re.VERBOSE,
)
_CALL = re.compile(r"([A-Za-z_$][\w$]*)\s*\(")
_IDENT = re.compile(r"[A-Za-z_$][\w$]*")
_BRANCH = re.compile(r"\b(?:if|switch|throw|while|for|catch|case)\b|\?")


def mask(source: str) -> str:
    """Blank out comments and string/char literal bodies, preserving offsets and newlines."""
    out = list(source)
    i, n = 0, len(source)
    while i < n:
        two = source[i : i + 2]
        ch = source[i]
        if two == "//":
            j = source.find("\n", i)
            j = n if j < 0 else j
            for k in range(i, j):
                out[k] = " "
            i = j
        elif two == "/*":
            j = source.find("*/", i + 2)
            j = n if j < 0 else j + 2
            for k in range(i, j):
                if source[k] != "\n":
                    out[k] = " "
            i = j
        elif ch in "\"'":
            j = i + 1
            while j < n and source[j] != ch and source[j] != "\n":
                j += 2 if source[j] == "\\" else 1
            for k in range(i + 1, min(j, n)):
                out[k] = " "
            i = j + 1
        else:
            i += 1
    return "".join(out)


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def _matching(text: str, pos: int, open_ch: str, close_ch: str) -> int:
    depth = 0
    for i in range(pos, len(text)):
        if text[i] == open_ch:
            depth += 1
        elif text[i] == close_ch:
            depth -= 1
            if depth == 0:
                return i
    raise ParseError(f"unbalanced '{open_ch}'", _line_of(text, pos))


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "(<[{":
            depth += 1
        elif ch in ")>]}":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if "".join(cur).strip():
        parts.append("".join(cur))
    return parts


def _identifiers(text: str) -> frozenset[str]:
    return frozenset(t for t in _IDENT.findall(text) if t not in KEYWORDS)


def _calls(masked: str, start: int, end: int) -> tuple[CallSite, ...]:
    sites = []
    for m in _CALL.finditer(masked, start, end):
        name = m.group(1)
        if name in KEYWORDS:
            continue
        # walk back over a qualifier chain
        parts = [name]
        k = m.start(1)
        while True:
            j = k
            while j > start and masked[j - 1].isspace():
                j -= 1
            if j > start and masked[j - 1] == ".":
                j -= 1
                while j > start and masked[j - 1].isspace():
                    j -= 1
                q = re.search(r"[A-Za-z_$][\w$]*$", masked[start:j])
                if q and (j - len(q.group(0))) >= start:
                    parts.append(q.group(0))
                    k = j - len(q.group(0))
                    continue
                parts.append("?")
            break
        dotted = ".".join(reversed(parts))  # `new Foo(` is recorded as `Foo`
        open_pos = m.end() - 1
        close = _matching(masked, open_pos, "(", ")")
        args = tuple(_identifiers(a) for a in _split_top(masked[open_pos + 1 : close]))
        sites.append(CallSite(dotted, _line_of(masked, m.start(1)), args))
    return tuple(sites)


def _params(text: str) -> tuple[tuple[str, ...], bool]:
    names = []
    variadic = False
    for part in _split_top(_ANNOTATION.sub(" ", text)):
        idents = _IDENT.findall(part)
        if not idents:
            continue
        if "..." in part:
            variadic = True
        names.append(idents[-1])
    return tuple(names), variadic


@lru_cache(maxsize=256)
def parse_functions(source: str) -> tuple[FunctionInfo, ...]:
    masked = mask(source)
    if masked.count("(") != masked.count(")"):
        raise ParseError("unbalanced parentheses", None)
    stack: list[tuple[str, int, object]] = []  # (kind, open_pos, header match)
    boundary = 0
    out: list[FunctionInfo] = []
    for pos, ch in enumerate(masked):
        if ch == "{":
            header = _ANNOTATION.sub(" ", masked[boundary:pos]).strip()
            kind = "block"
            match = None
            if re.search(r"\b(class|interface|enum|record)\b", header) and not re.search(r"\bnew\b", header):
                kind = "class"
            elif stack and stack[-1][0] == "class" and "=" not in header:
                match = _HEADER.match(" ".join(header.split()))
                if match and match.group("name") not in _CONTROL:
                    kind = "method"
            stack.append((kind, pos, match))
            boundary = pos + 1
        elif ch == "}":
            if not stack:
                raise ParseError("unmatched '}'", _line_of(masked, pos))
            kind, open_pos, match = stack.pop()
            if kind == "method":
                out.append(_method_info(masked, match, open_pos, pos))
            boundary = pos + 1
        elif ch == ";":
            boundary = pos + 1
    if stack:
        raise ParseError("unclosed '{'", _line_of(masked, stack[-1][1]))
    out.sort(key=lambda f: f.line)
    return tuple(out)


def _method_info(masked: str, match: re.Match, open_pos: int, close_pos: int) -> FunctionInfo:
    mods = match.group("mods").split()
    name = match.group("name")
    params, _ = _params(match.group("params"))
    name_pos = masked.rfind(name + "(", 0, open_pos)
    if name_pos < 0:
        name_pos = masked.rfind(name, 0, open_pos)
    start_line = _line_of(masked, name_pos)
    end_line = _line_of(masked, close_pos)
    body = masked[open_pos + 1 : close_pos]
    calls = _calls(masked, open_pos + 1, close_pos)
    hidden = "private" in mods or "protected" in mods
    return FunctionInfo(
        name=name,
        parameter_names=params,
        visibility=Visibility.NON_PUBLIC if hidden else Visibility.PUBLIC,
        body_span=(start_line, max(start_line, end_line)),
        contains_branch_or_raise=bool(_BRANCH.search(body)),
        called_names=tuple(dict.fromkeys(c.name for c in calls)),
        calls=calls,
        required_parameters=params,
        qualname=name,
        line=start_line,
    )
