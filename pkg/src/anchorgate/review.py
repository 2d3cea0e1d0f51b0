"""Offline semantic review of the baseline and final programs.

The reviewer never takes part in gate decisions; it is called once on the
baseline and once on the final program of a chain.  Every backend returns
the raw reply text, which must be JSON of the form::

    {"issues": [{"line": 12, "category": "latent_security",
                 "type": "weakened-exception-handling", "description": "..."}]}
"""

from __future__ import annotations

import ast
import json
import re
from typing import Protocol

from anchorgate.anchors import default_library
from anchorgate.anchors.invariants import Context, check_invariant, input_guarded_generic, input_guarded_py
from anchorgate.errors import AnchorGateError, ParseError, ReviewUnavailable
from anchorgate.frontend import parse_functions
from anchorgate.frontend.python import dotted_name, parse_module
from anchorgate.model import CodeSnapshot, Language, ReviewCategory, ReviewIssue, ReviewSummary

_JSON_FENCE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.S)
_BROAD = {"Exception", "BaseException"}


class Reviewer(Protocol):
    name: str

    def reply(self, snapshot: CodeSnapshot) -> str: ...


class ReviewSchemaError(ValueError):
    pass


def parse_review_reply(text: str) -> ReviewSummary:
    m = _JSON_FENCE.search(text)
    payload = m.group(1) if m else text
    try:
        data = json.loads(payload)
        raw_issues = data["issues"]
        if not isinstance(raw_issues, list):
            raise TypeError("issues must be a list")
        issues = tuple(
            ReviewIssue(
                line=int(i["line"]),
                category=ReviewCategory(i["category"]),
                type=str(i["type"]),
                description=str(i.get("description", "")),
            )
            for i in raw_issues
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ReviewSchemaError(f"review reply violates the schema: {exc}") from None
    return ReviewSummary(issues)


def review(snapshot: CodeSnapshot, reviewer: Reviewer) -> ReviewSummary:
    """Ask ``reviewer`` about ``snapshot``; a schema violation is retried once."""
    last = ""
    for _ in range(2):
        try:
            text = reviewer.reply(snapshot)
        except AnchorGateError as exc:
            raise ReviewUnavailable(f"reviewer unavailable: {exc}") from None
        try:
            return parse_review_reply(text)
        except ReviewSchemaError as exc:
            last = str(exc)
    raise ReviewUnavailable(last)


# ---------------------------------------------------------------------------
# backends
# ---------------------------------------------------------------------------


def _issue(line: int, category: ReviewCategory, kind: str, description: str) -> dict:
    return {"line": max(line, 1), "category": category.value, "type": kind, "description": description}


def _exception_issues(tree: ast.Module) -> list[dict]:
    out = []
    for node in ast.walk(tree):
        if not isinstance(node, ast.ExceptHandler):
            continue
        broad = node.type is None or dotted_name(node.type) in _BROAD
        silent = all(
            isinstance(s, (ast.Pass, ast.Continue))
            or (isinstance(s, ast.Return) and (s.value is None or isinstance(s.value, ast.Constant)))
            or (isinstance(s, ast.Expr) and isinstance(s.value, ast.Constant))
            for s in node.body
        )
        if broad or silent:
            what = "bare except" if node.type is None else ("broad handler" if broad else "silent handler")
            out.append(
                _issue(
                    node.lineno,
                    ReviewCategory.LATENT_SECURITY,
                    "weakened-exception-handling",
                    f"{what} swallows errors that callers rely on",
                )
            )
    return out


def _reliability_issues(tree: ast.Module) -> list[dict]:
    out = []
    for node in ast.walk(tree):
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            for d in node.args.defaults + node.args.kw_defaults:
                if isinstance(d, (ast.List, ast.Dict, ast.Set)):
                    out.append(_issue(node.lineno, ReviewCategory.RELIABILITY, "mutable-default", f"{node.name} has a mutable default"))
        elif isinstance(node, ast.Compare) and any(
            isinstance(op, (ast.Eq, ast.NotEq)) for op in node.ops
        ) and any(isinstance(c, ast.Constant) and c.value is None for c in [node.left, *node.comparators]):
            out.append(_issue(node.lineno, ReviewCategory.RELIABILITY, "none-equality", "compare with None using 'is'"))
    return out


class HeuristicReviewer:
    """Rule-based stand-in for a semantic reviewer model.

    Latent-security issues: weakened exception handling, public parameters
    reaching sinks without a guard (bound SQL parameters included), and
    any violated invariant from the rule base.  Reliability issues: resource
    and lock leaks, mutable defaults, ``== None``.
    """

    name = "heuristic"

    def __init__(self, library=None):
        self.library = library or default_library()

    def reply(self, snapshot: CodeSnapshot) -> str:
        issues: list[dict] = []
        try:
            functions = parse_functions(snapshot)
        except ParseError as exc:
            issues.append(_issue(exc.line or 1, ReviewCategory.RELIABILITY, "syntax-error", str(exc)))
            return json.dumps({"issues": issues})
        ctx = Context(snapshot, functions, self.library)
        if snapshot.language is Language.PYTHON:
            tree = parse_module(snapshot.source)
            issues += _exception_issues(tree)
            issues += _reliability_issues(tree)
        if snapshot.language is Language.PYTHON:
            unguarded = input_guarded_py(ctx, query_only=False, inline_guards=True)
        else:
            unguarded = input_guarded_generic(ctx, query_only=False)
        for v in unguarded:
            issues.append(_issue(v.line, ReviewCategory.LATENT_SECURITY, "missing-input-validation", v.message))
        reliability = {"res-scoped-acquire", "res-lock-release"}
        for inv in self.library.invariants:
            if inv.id == "input-guarded-sinks":
                continue
            try:
                violations = check_invariant(inv.id, snapshot, self.library)
            except KeyError:
                continue
            cat = ReviewCategory.RELIABILITY if inv.id in reliability else ReviewCategory.LATENT_SECURITY
            issues += [_issue(v.line, cat, inv.id, v.message) for v in violations]
        unique = {(i["line"], i["category"], i["type"]): i for i in issues}
        return json.dumps({"issues": [unique[k] for k in sorted(unique)]}, sort_keys=True)


class CannedReviewer:
    """Replays fixed replies in order (the last one repeats)."""

    name = "canned"

    def __init__(self, replies: list[str]):
        if not replies:
            raise ValueError("at least one canned reply is required")
        self.replies = list(replies)
        self.calls = 0

    def reply(self, snapshot: CodeSnapshot) -> str:
        text = self.replies[min(self.calls, len(self.replies) - 1)]
        self.calls += 1
        return text


REVIEW_PROMPT = (
    "Review the program below for latent security defects (weakened validation, exception handling "
    "or permission checks) and reliability defects. Reply with JSON only: "
    '{"issues": [{"line": <int>, "category": "latent_security" | "reliability", '
    '"type": "<short-kebab-case>", "description": "<text>"}]}'
)


class HttpReviewer:
    name = "http"

    def __init__(self, client):
        self.client = client

    def reply(self, snapshot: CodeSnapshot) -> str:
        lang = snapshot.language.value
        return self.client.complete(
            [
                {"role": "system", "content": "You are a meticulous security code reviewer."},
                {"role": "user", "content": f"{REVIEW_PROMPT}\n\n```{lang}\n{snapshot.source}\n```"},
            ]
        )
