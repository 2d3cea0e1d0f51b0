"""Syntax-level checks behind the invariant rule base.

Every check is an approximation over one file; each docstring states how
far it goes.  Checks return the list of violations; an empty list means the
invariant holds.  A language without an implementation makes the invariant
inapplicable (it is neither mined nor enforced).
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from typing import Callable

from anchorgate.anchors.library import Library, default_library
from anchorgate.frontend import CallSite, FunctionInfo, parse_functions
from anchorgate.frontend.python import dotted_name, names_in, parse_module
from anchorgate.model import CodeSnapshot, Language
from anchorgate.sast.builtin import NORMALIZERS, SQL_SINKS, _assignments, _is_literal, _own_nodes, _string_kind

SECRETISH = re.compile(r"(?i)(token|password|passwd|secret|signature|digest|hmac|api_?key)")
TOKENISH = re.compile(r"(?i)(token|key|secret|salt|nonce|password|otp|session|reset_code|\biv\b)")
RESOURCE_CALLS = frozenset({"open", "connect", "socket", "urlopen", "create_connection"})
ENTROPY_CALLS = frozenset({"token_bytes", "token_hex", "token_urlsafe", "urandom", "get_random_bytes"})


@dataclass(frozen=True)
class Violation:
    line: int
    message: str


@dataclass
class Context:
    snapshot: CodeSnapshot
    functions: list[FunctionInfo]
    library: Library

    @property
    def tree(self) -> ast.Module:
        return parse_module(self.snapshot.source)

    @property
    def local(self) -> dict[str, FunctionInfo]:
        return {f.name: f for f in self.functions}

    def resolve(self, call: CallSite) -> FunctionInfo | None:
        head = call.name.split(".")[0]
        if "." in call.name and head not in ("self", "cls") and head not in {
            f.qualname.split(".")[0] for f in self.functions if "." in f.qualname
        }:
            return None
        return self.local.get(call.short_name)

    def is_guard_call(self, call: CallSite, exclude: str = "") -> bool:
        if self.library.name_family(call.short_name):
            return True
        target = self.resolve(call)
        return bool(target and target.name != exclude and target.contains_branch_or_raise)


def _python_functions(tree: ast.Module):
    for node in tree.body:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            yield node, None
        elif isinstance(node, ast.ClassDef):
            for item in node.body:
                if isinstance(item, (ast.FunctionDef, ast.AsyncFunctionDef)):
                    yield item, node.name


def _all_scopes(tree: ast.Module):
    yield tree
    for node in ast.walk(tree):
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            yield node


# ---------------------------------------------------------------------------
# database
# ---------------------------------------------------------------------------


def db_parameterized_py(ctx: Context) -> list[Violation]:
    """Execute calls whose query is not a literal must pass a second (parameters) argument."""
    out = []
    for scope in _all_scopes(ctx.tree):
        assigned = _assignments(scope)
        for node in _own_nodes(scope):
            if not isinstance(node, ast.Call):
                continue
            name = dotted_name(node.func)
            if "." not in name or name.rsplit(".", 1)[-1] not in SQL_SINKS or not node.args:
                continue
            query = node.args[0]
            if isinstance(query, ast.Name) and query.id in assigned and _is_literal(assigned[query.id]):
                continue
            if _is_literal(query):
                continue
            if len(node.args) + len(node.keywords) < 2:
                out.append(Violation(node.lineno, f"{name} runs a non-literal query without bound parameters"))
    return out


def db_parameterized_java(ctx: Context) -> list[Violation]:
    """Statement.execute*(variable) with no placeholders bound."""
    out = []
    for m in re.finditer(r"\.execute(?:Query|Update)?\(\s*[A-Za-z_]\w*\s*\)", ctx.snapshot.source):
        out.append(Violation(ctx.snapshot.source.count("\n", 0, m.start()) + 1, "query executed without bound parameters"))
    return out


def db_no_string_sql_py(ctx: Context) -> list[Violation]:
    out = []
    for scope in _all_scopes(ctx.tree):
        assigned = _assignments(scope)
        for node in _own_nodes(scope):
            if isinstance(node, ast.Call) and node.args:
                name = dotted_name(node.func)
                if "." in name and name.rsplit(".", 1)[-1] in SQL_SINKS and _string_kind(node.args[0], assigned):
                    out.append(Violation(node.lineno, f"{name} receives a string-built query"))
    return out


def db_no_string_sql_java(ctx: Context) -> list[Violation]:
    from anchorgate.sast.builtin import _java_findings

    return [
        Violation(f.line, f.message)
        for f in _java_findings(ctx.snapshot.source, False)
        if f.rule_id in ("sql-concat", "sql-format")
    ]


# ---------------------------------------------------------------------------
# input
# ---------------------------------------------------------------------------


def input_guarded_py(ctx: Context, query_only: bool = True, inline_guards: bool = False) -> list[Violation]:
    """Taint public parameters through simple assignments; a guard call clears them.

    Guards are name-rule functions or file-local functions that branch or
    raise.  For SQL sinks only the query argument counts (bound parameters
    are not an injection path) unless ``query_only`` is off.  With
    ``inline_guards`` an ``if`` on a parameter whose body raises or returns
    also validates it.
    """
    out = []
    local = ctx.local
    for fn, owner in _python_functions(ctx.tree):
        if fn.name.startswith("_") or (owner or "").startswith("_"):
            continue
        params = {a.arg for a in fn.args.posonlyargs + fn.args.args + fn.args.kwonlyargs} - {"self", "cls"}
        tainted, validated = set(params), set()
        events = []
        for node in _own_nodes(fn):
            if isinstance(node, ast.Call):
                events.append((node.lineno, 0, node.col_offset, node))
            elif isinstance(node, ast.Assign):
                events.append((node.lineno, 1, node.col_offset, node))
            elif inline_guards and isinstance(node, ast.If) and _rejects(node.body):
                events.append((node.lineno, 1, node.col_offset, node))
        for *_, node in sorted(events, key=lambda e: e[:3]):
            if isinstance(node, ast.If):
                validated |= names_in(node.test) & tainted
                continue
            if isinstance(node, ast.Assign):
                targets = {t.id for t in node.targets if isinstance(t, ast.Name)}
                if isinstance(node.value, ast.Call) and _guard_name(ctx, dotted_name(node.value.func), fn.name, local):
                    validated |= targets
                elif names_in(node.value) & (tainted - validated):
                    tainted |= targets
                continue
            name = dotted_name(node.func)
            if _guard_name(ctx, name, fn.name, local):
                for a in list(node.args) + [k.value for k in node.keywords]:
                    validated |= names_in(a) & tainted
                continue
            sink = ctx.library.sink_class(name, Language.PYTHON)
            if not sink:
                continue
            args = node.args[:1] if sink == "sql" and query_only else list(node.args) + [k.value for k in node.keywords]
            reached = set().union(*(names_in(a) for a in args)) if args else set()
            bad = reached & (tainted - validated)
            if bad:
                out.append(Violation(node.lineno, f"{fn.name}: {', '.join(sorted(bad))} reaches {name} unguarded"))
    return out


def _rejects(body: list[ast.stmt]) -> bool:
    return any(isinstance(stmt, (ast.Raise, ast.Return)) for stmt in body)


def _guard_name(ctx: Context, name: str, current: str, local: dict[str, FunctionInfo]) -> bool:
    short = name.rsplit(".", 1)[-1]
    if ctx.library.name_family(short):
        return True
    target = local.get(short)
    head = name.split(".")[0]
    if target is None or ("." in name and head not in ("self", "cls")):
        return False
    return target.name != current and target.contains_branch_or_raise


def input_guarded_generic(ctx: Context, query_only: bool = True) -> list[Violation]:
    """Same rule on the function inventory, without alias tracking.

    ``query_only=False`` counts every argument of SQL sinks, which flags
    unvalidated data even when it is bound as a parameter.
    """
    out = []
    for f in ctx.functions:
        if not f.is_public:
            continue
        params, validated = set(f.parameter_names), set()
        for call in f.calls:
            if ctx.is_guard_call(call, exclude=f.name):
                validated |= call.identifiers & params
                continue
            sink = ctx.library.sink_class(call.name, ctx.snapshot.language)
            if not sink:
                continue
            args = call.args[:1] if sink == "sql" and query_only else call.args
            reached = set().union(*args) if args else set()
            bad = reached & (params - validated)
            if bad:
                out.append(Violation(call.line, f"{f.name}: {', '.join(sorted(bad))} reaches {call.name} unguarded"))
    return out


def input_validators_reject(ctx: Context) -> list[Violation]:
    return [
        Violation(f.line, f"{f.name} never rejects input")
        for f in ctx.functions
        if ctx.library.name_family(f.name) == "validate" and not f.contains_branch_or_raise
    ]


# ---------------------------------------------------------------------------
# authentication
# ---------------------------------------------------------------------------


def auth_permission_generic(ctx: Context) -> list[Violation]:
    """Public functions must call a permission check before a privileged operation.

    Privilege flows through file-local helpers: a helper that performs a
    privileged operation without its own check makes its callers privileged.
    "Before" means on an earlier or the same line.
    """
    lib = ctx.library
    memo: dict[str, str | None] = {}

    def checked(f: FunctionInfo) -> bool:
        return any(lib.privileged_checks.search(c.short_name) for c in f.calls)

    def unguarded(f: FunctionInfo, trail: frozenset[str]) -> str | None:
        if f.name in memo:
            return memo[f.name]
        checks = [c.line for c in f.calls if lib.privileged_checks.search(c.short_name)]
        first_check = min(checks) if checks else None
        result = None
        for c in f.calls:
            target = ctx.resolve(c)
            if target is not None and target.name not in trail and target.name != f.name:
                op = unguarded(target, trail | {f.name})
                # a privileged-named helper without its own check is itself the operation
                if op is None and lib.privileged_ops.search(target.name) and not checked(target):
                    op = c.name
            elif target is None and lib.privileged_ops.search(c.short_name):
                op = c.name
            else:
                op = None
            if op and (first_check is None or first_check > c.line):
                result = op
                break
        memo[f.name] = result
        return result

    out = []
    for f in ctx.functions:
        if f.is_public:
            op = unguarded(f, frozenset())
            if op:
                out.append(Violation(f.line, f"{f.interface_name} reaches {op} without a permission check"))
    return out


def auth_constant_time_py(ctx: Context) -> list[Violation]:
    out = []
    for node in ast.walk(ctx.tree):
        if not isinstance(node, ast.Compare) or not all(isinstance(op, (ast.Eq, ast.NotEq)) for op in node.ops):
            continue
        operands = [node.left, *node.comparators]
        if any(isinstance(o, ast.Constant) for o in operands):
            continue
        for o in operands:
            label = dotted_name(o.value if isinstance(o, ast.Subscript) else o)
            if isinstance(o, ast.Subscript) and isinstance(o.slice, ast.Constant):
                label += f".{o.slice.value}"
            if SECRETISH.search(label):
                out.append(Violation(node.lineno, f"{label} compared with ==/!="))
                break
    return out


def auth_constant_time_java(ctx: Context) -> list[Violation]:
    rx = re.compile(r"\b(\w*(?:token|password|secret|signature|digest)\w*)\s*(?:\.equals\(|==|!=)", re.I)
    src = ctx.snapshot.source
    return [Violation(src.count("\n", 0, m.start()) + 1, f"{m.group(1)} compared non-constant-time") for m in rx.finditer(src)]


# ---------------------------------------------------------------------------
# resources
# ---------------------------------------------------------------------------


def _finally_calls(fn: ast.AST) -> list[ast.Call]:
    out = []
    for node in ast.walk(fn):
        if isinstance(node, ast.Try):
            for stmt in node.finalbody:
                out.extend(n for n in ast.walk(stmt) if isinstance(n, ast.Call))
    return out


def res_scoped_acquire_py(ctx: Context) -> list[Violation]:
    """Opened files/connections need a with-scope, a close() in finally, or to be returned."""
    out = []
    for scope in _all_scopes(ctx.tree):
        if scope is ctx.tree:
            continue
        nodes = list(_own_nodes(scope))
        with_items = {id(i.context_expr) for n in nodes if isinstance(n, (ast.With, ast.AsyncWith)) for i in n.items}
        with_names = {
            i.context_expr.id
            for n in nodes
            if isinstance(n, (ast.With, ast.AsyncWith))
            for i in n.items
            if isinstance(i.context_expr, ast.Name)
        }
        returned = {id(n.value) for n in nodes if isinstance(n, ast.Return) and n.value is not None}
        returned_names = set().union(*(names_in(n.value) for n in nodes if isinstance(n, ast.Return) and n.value))
        wrapped = {
            id(a)
            for n in nodes
            if isinstance(n, ast.Call) and dotted_name(n.func).rsplit(".", 1)[-1] in ("closing", "enter_context")
            for a in n.args
        }
        assigned: dict[int, str] = {}
        for n in nodes:
            if isinstance(n, ast.Assign) and isinstance(n.value, ast.Call):
                for t in n.targets:
                    if isinstance(t, (ast.Name, ast.Attribute)):
                        assigned[id(n.value)] = t.id if isinstance(t, ast.Name) else t.attr
        finally_closed = {
            dotted_name(c.func).rsplit(".", 2)[-2]
            for c in _finally_calls(scope)
            if dotted_name(c.func).endswith((".close", ".release")) and dotted_name(c.func).count(".") >= 1
        }
        for n in nodes:
            if not isinstance(n, ast.Call):
                continue
            short = dotted_name(n.func).rsplit(".", 1)[-1]
            if short not in RESOURCE_CALLS:
                continue
            if id(n) in with_items or id(n) in returned or id(n) in wrapped:
                continue
            target = assigned.get(id(n))
            if target and (target in finally_closed or target in with_names or target in returned_names):
                continue
            out.append(Violation(n.lineno, f"{dotted_name(n.func)} result is not released on every path"))
    return out


def res_lock_release_py(ctx: Context) -> list[Violation]:
    out = []
    for scope in _all_scopes(ctx.tree):
        nodes = list(_own_nodes(scope))
        with_items = {id(i.context_expr) for n in nodes if isinstance(n, (ast.With, ast.AsyncWith)) for i in n.items}
        released = {dotted_name(c.func)[: -len(".release")] for c in _finally_calls(scope) if dotted_name(c.func).endswith(".release")}
        for n in nodes:
            if isinstance(n, ast.Call) and dotted_name(n.func).endswith(".acquire") and id(n) not in with_items:
                owner = dotted_name(n.func)[: -len(".acquire")]
                if owner not in released:
                    out.append(Violation(n.lineno, f"{owner}.acquire() without release() in finally"))
    return out


def res_lock_release_java(ctx: Context) -> list[Violation]:
    src = ctx.snapshot.source
    locks = [m for m in re.finditer(r"(\w+)\.lock\(\)", src)]
    out = []
    for m in locks:
        if not re.search(r"finally\s*\{[^}]*\b" + re.escape(m.group(1)) + r"\.unlock\(\)", src):
            out.append(Violation(src.count("\n", 0, m.start()) + 1, f"{m.group(1)}.lock() without unlock() in finally"))
    return out


# ---------------------------------------------------------------------------
# cryptography
# ---------------------------------------------------------------------------


def crypto_secure_random_py(ctx: Context) -> list[Violation]:
    tree = ctx.tree
    from_random = {
        alias.asname or alias.name
        for node in ast.walk(tree)
        if isinstance(node, ast.ImportFrom) and node.module == "random"
        for alias in node.names
    }
    out = []
    for fn, _ in _python_functions(tree):
        if not TOKENISH.search(fn.name):
            continue
        for node in ast.walk(fn):
            if isinstance(node, ast.Call):
                name = dotted_name(node.func)
                if name.startswith("random.") or name in from_random:
                    out.append(Violation(node.lineno, f"{fn.name} uses weak randomness {name}"))
    return out


def crypto_secure_random_generic(ctx: Context) -> list[Violation]:
    out = []
    for f in ctx.functions:
        if TOKENISH.search(f.name):
            for c in f.calls:
                if c.name in ("Random", "Math.random", "java.util.Random"):
                    out.append(Violation(c.line, f"{f.name} uses weak randomness {c.name}"))
    return out


def crypto_key_length_py(ctx: Context) -> list[Violation]:
    out = []
    for node in ast.walk(ctx.tree):
        if isinstance(node, ast.Call) and dotted_name(node.func).rsplit(".", 1)[-1] in ENTROPY_CALLS:
            if node.args and isinstance(node.args[0], ast.Constant) and isinstance(node.args[0].value, int):
                if node.args[0].value < 16:
                    out.append(Violation(node.lineno, f"only {node.args[0].value} bytes of entropy"))
    return out


# ---------------------------------------------------------------------------
# path
# ---------------------------------------------------------------------------


def _file_sink_calls(ctx: Context, scope: ast.AST):
    for node in _own_nodes(scope):
        if isinstance(node, ast.Call) and node.args and not _is_literal(node.args[0]):
            if ctx.library.sink_class(dotted_name(node.func), Language.PYTHON) == "file":
                yield node


def path_normalized_py(ctx: Context) -> list[Violation]:
    """A variable path must meet a normalizer or guard call on an earlier line (or be produced by one)."""
    out = []
    local = ctx.local
    for scope in _all_scopes(ctx.tree):
        if scope is ctx.tree:
            continue
        nodes = list(_own_nodes(scope))
        calls = [n for n in nodes if isinstance(n, ast.Call)]
        normalized_targets = set()
        for n in nodes:
            if isinstance(n, ast.Assign) and any(
                isinstance(c, ast.Call) and _normalizing(ctx, dotted_name(c.func), scope.name, local)
                for c in ast.walk(n.value)
            ):
                normalized_targets |= {t.id for t in n.targets if isinstance(t, ast.Name)}
        for sink in _file_sink_calls(ctx, scope):
            ids = names_in(sink.args[0])
            if ids & normalized_targets:
                continue
            ok = any(
                c is not sink
                and c.lineno <= sink.lineno
                and _normalizing(ctx, dotted_name(c.func), scope.name, local)
                and (set().union(*(names_in(a) for a in c.args)) if c.args else set()) & ids
                for c in calls
            )
            if not ok:
                out.append(Violation(sink.lineno, f"{dotted_name(sink.func)} opens an unnormalized path"))
    return out


def _normalizing(ctx: Context, name: str, current: str, local: dict[str, FunctionInfo]) -> bool:
    return name.rsplit(".", 1)[-1] in NORMALIZERS or _guard_name(ctx, name, current, local)


def path_normalized_generic(ctx: Context) -> list[Violation]:
    out = []
    for f in ctx.functions:
        seen_norm = False
        for c in f.calls:
            if c.short_name in ("getCanonicalPath", "getCanonicalFile", "normalize", "toRealPath") or ctx.is_guard_call(c, f.name):
                seen_norm = True
            elif ctx.library.sink_class(c.name, ctx.snapshot.language) == "file" and c.identifiers and not seen_norm:
                out.append(Violation(c.line, f"{c.name} opens an unnormalized path"))
    return out


def path_contained_py(ctx: Context) -> list[Violation]:
    sinks = [s for scope in _all_scopes(ctx.tree) for s in _file_sink_calls(ctx, scope)]
    if not sinks:
        return []
    checks = {"startswith", "commonpath", "is_relative_to", "relative_to"}
    if any(isinstance(n, ast.Call) and dotted_name(n.func).rsplit(".", 1)[-1] in checks for n in ast.walk(ctx.tree)):
        return []
    return [Violation(sinks[0].lineno, "variable paths are opened but containment is never checked")]


def path_contained_java(ctx: Context) -> list[Violation]:
    src = ctx.snapshot.source
    if re.search(r"new\s+File(?:InputStream|Reader)?\s*\(\s*[A-Za-z_]", src) and "startsWith(" not in src:
        return [Violation(1, "variable paths are opened but containment is never checked")]
    return []


CheckFn = Callable[[Context], list[Violation]]

CHECKS: dict[str, dict[str, CheckFn]] = {
    "db-parameterized-queries": {"python": db_parameterized_py, "java": db_parameterized_java},
    "db-no-string-built-sql": {"python": db_no_string_sql_py, "java": db_no_string_sql_java},
    "input-guarded-sinks": {"python": input_guarded_py, "java": input_guarded_generic},
    "input-validators-reject": {"python": input_validators_reject, "java": input_validators_reject},
    "auth-permission-before-sensitive": {"python": auth_permission_generic, "java": auth_permission_generic},
    "auth-constant-time-compare": {"python": auth_constant_time_py, "java": auth_constant_time_java},
    "res-scoped-acquire": {"python": res_scoped_acquire_py},
    "res-lock-release": {"python": res_lock_release_py, "java": res_lock_release_java},
    "crypto-secure-random": {"python": crypto_secure_random_py, "java": crypto_secure_random_generic},
    "crypto-key-length": {"python": crypto_key_length_py},
    "path-normalized": {"python": path_normalized_py, "java": path_normalized_generic},
    "path-contained": {"python": path_contained_py, "java": path_contained_java},
}


def applicable(inv_id: str, language: Language) -> bool:
    return language.value in CHECKS.get(inv_id, {})


def check_invariant(inv_id: str, snapshot: CodeSnapshot, library: Library | None = None) -> list[Violation]:
    """Violations of one invariant; raises KeyError when not implemented for the language."""
    fn = CHECKS[inv_id][snapshot.language.value]
    return fn(Context(snapshot, parse_functions(snapshot), library or default_library()))
