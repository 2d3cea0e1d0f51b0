"""Python frontend built on the standard library ``ast`` module."""

from __future__ import annotations

import ast
from functools import lru_cache

from anchorgate.errors import ParseError
from anchorgate.frontend.base import CallSite, FunctionInfo, Visibility

_BRANCH_NODES = (ast.If, ast.IfExp, ast.Raise, ast.Assert, ast.While, ast.Try, ast.Match)


@lru_cache(maxsize=512)
def parse_module(source: str) -> ast.Module:
    try:
        return ast.parse(source)
    except SyntaxError as exc:
        raise ParseError(exc.msg or "invalid syntax", exc.lineno) from None


def dotted_name(node: ast.AST) -> str:
    """``a.b.c`` for attribute chains; unresolvable bases become ``?``."""
    parts: list[str] = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if isinstance(node, ast.Name):
        parts.append(node.id)
    else:
        parts.append("?")
    return ".".join(reversed(parts))


def names_in(node: ast.AST) -> frozenset[str]:
    return frozenset(n.id for n in ast.walk(node) if isinstance(n, ast.Name))


def call_sites(body: list[ast.stmt]) -> tuple[CallSite, ...]:
    sites = []
    for stmt in body:
        for node in ast.walk(stmt):
            if isinstance(node, ast.Call):
                args = [names_in(a) for a in node.args] + [names_in(k.value) for k in node.keywords]
                sites.append(CallSite(dotted_name(node.func), node.lineno, tuple(args)))
    sites.sort(key=lambda c: (c.line, c.name))
    return tuple(sites)


def _function_info(fn: ast.FunctionDef | ast.AsyncFunctionDef, owner: str | None) -> FunctionInfo:
    a = fn.args
    positional = [p.arg for p in a.posonlyargs + a.args]
    n_defaults = len(a.defaults)
    required = positional[: len(positional) - n_defaults] if n_defaults else list(positional)
    required += [p.arg for p, d in zip(a.kwonlyargs, a.kw_defaults) if d is None]
    params = positional + ([f"*{a.vararg.arg}"] if a.vararg else [])
    params += [p.arg for p in a.kwonlyargs] + ([f"**{a.kwarg.arg}"] if a.kwarg else [])
    is_static = any(dotted_name(d) == "staticmethod" for d in fn.decorator_list)
    if owner and not is_static and params and params[0] in ("self", "cls"):
        dropped = params.pop(0)
        if required and required[0] == dropped:
            required.pop(0)

    branches = any(isinstance(n, _BRANCH_NODES) for stmt in fn.body for n in ast.walk(stmt))
    calls = call_sites(fn.body)
    public = not fn.name.startswith("_") and not (owner or "").startswith("_")
    return FunctionInfo(
        name=fn.name,
        parameter_names=tuple(params),
        visibility=Visibility.PUBLIC if public else Visibility.NON_PUBLIC,
        body_span=(fn.lineno, fn.end_lineno or fn.lineno),
        contains_branch_or_raise=branches,
        called_names=tuple(dict.fromkeys(c.name for c in calls)),
        calls=calls,
        required_parameters=tuple(required),
        qualname=f"{owner}.{fn.name}" if owner else fn.name,
        line=fn.lineno,
    )


@lru_cache(maxsize=512)
def parse_functions(source: str) -> tuple[FunctionInfo, ...]:
    tree = parse_module(source)
    out: list[FunctionInfo] = []
    for node in tree.body:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            out.append(_function_info(node, None))
        elif isinstance(node, ast.ClassDef):
            for item in node.body:
                if isinstance(item, (ast.FunctionDef, ast.AsyncFunctionDef)):
                    out.append(_function_info(item, node.name))
    return tuple(out)


def enclosing_function(tree: ast.Module, line: int) -> str | None:
    best = None
    for node in ast.walk(tree):
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            end = node.end_lineno or node.lineno
            if node.lineno <= line <= end and (best is None or node.lineno >= best.lineno):
                best = node
    return best.name if best else None
