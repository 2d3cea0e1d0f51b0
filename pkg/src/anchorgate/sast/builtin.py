"""Deterministic built-in analyzer.

Ten rules split in two families.  ``vulnerability`` rules are the default
gate profile.  ``hygiene`` rules (bare/empty exception handlers) describe
code quality rather than an exploitable pattern and only run when enabled.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass

from anchorgate.frontend.python import dotted_name, names_in, parse_module
from anchorgate.model import CodeSnapshot, Finding, Language, Severity

SQL_SINKS = frozenset({"execute", "executemany", "executescript", "raw"})
SHELL_CALLS = frozenset(
    {"subprocess.call", "subprocess.run", "subprocess.Popen", "subprocess.check_output", "subprocess.check_call"}
)
DESERIALIZERS = frozenset(
    {"pickle.loads", "pickle.load", "cPickle.loads", "cPickle.load", "marshal.loads", "marshal.load",
     "yaml.unsafe_load", "dill.loads", "shelve.open"}
)
NORMALIZERS = frozenset({"realpath", "abspath", "normpath", "resolve", "commonpath", "is_relative_to", "safe_join"})
SECRET_NAME = re.compile(r"(?i)(password|passwd|secret|api_?key|auth_?token|private_?key)")


@dataclass(frozen=True)
class Rule:
    rule_id: str
    severity: Severity
    family: str
    message: str


RULES: dict[str, Rule] = {
    r.rule_id: r
    for r in [
        Rule("sql-concat", Severity.HIGH, "vulnerability", "SQL built by string concatenation reaches execute"),
        Rule("sql-format", Severity.HIGH, "vulnerability", "SQL built by string formatting reaches execute"),
        Rule("eval-exec", Severity.HIGH, "vulnerability", "eval/exec on non-literal input"),
        Rule("unsafe-deserialization", Severity.CRITICAL, "vulnerability", "deserialization of untrusted data"),
        Rule("shell-injection", Severity.HIGH, "vulnerability", "shell command built from variable input"),
        Rule("hardcoded-secret", Severity.MEDIUM, "vulnerability", "hard-coded credential literal"),
        Rule("weak-hash", Severity.MEDIUM, "vulnerability", "MD5/SHA1 used for hashing"),
        Rule("path-traversal", Severity.HIGH, "vulnerability", "unvalidated joined path reaches open"),
        Rule("bare-except", Severity.LOW, "hygiene", "bare except clause"),
        Rule("empty-except", Severity.LOW, "hygiene", "exception handler discards the error"),
    ]
}


def _finding(rule_id: str, line: int) -> Finding:
    rule = RULES[rule_id]
    return Finding(rule_id, rule.severity, max(line, 1), rule.message)


# ---------------------------------------------------------------------------
# python
# ---------------------------------------------------------------------------


def _string_kind(node: ast.AST, assigned: dict[str, ast.AST], depth: int = 0) -> str | None:
    """Classify an expression as a concatenated or formatted string."""
    if depth > 8:
        return None
    if isinstance(node, ast.JoinedStr):
        return "format" if any(isinstance(v, ast.FormattedValue) for v in node.values) else None
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Mod) and _is_str(node.left, assigned):
            return "format"
        if isinstance(node.op, ast.Add):
            sides = (node.left, node.right)
            if all(isinstance(s, ast.Constant) for s in sides):
                return None
            if any(_is_str(s, assigned) or _string_kind(s, assigned, depth + 1) for s in sides):
                return "concat"
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Attribute) and node.func.attr == "format":
        if _is_str(node.func.value, assigned):
            return "format"
    if isinstance(node, ast.Name) and node.id in assigned:
        return _string_kind(assigned[node.id], assigned, depth + 1)
    return None


def _is_str(node: ast.AST, assigned: dict[str, ast.AST]) -> bool:
    if isinstance(node, ast.Constant) and isinstance(node.value, str):
        return True
    if isinstance(node, ast.JoinedStr):
        return True
    if isinstance(node, ast.Name) and node.id in assigned:
        value = assigned[node.id]
        return isinstance(value, ast.JoinedStr) or (
            isinstance(value, ast.Constant) and isinstance(value.value, str)
        )
    return False


def _scopes(tree: ast.Module):
    yield tree
    for node in ast.walk(tree):
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            yield node


def _own_nodes(scope: ast.AST):
    """Nodes of a scope, not descending into nested function definitions."""
    stack = list(ast.iter_child_nodes(scope))
    while stack:
        node = stack.pop()
        yield node
        if not isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.Lambda)):
            stack.extend(ast.iter_child_nodes(node))


def _assignments(scope: ast.AST) -> dict[str, ast.AST]:
    """Name -> value of the string-building assignment (augmented += counts as concat)."""
    out: dict[str, ast.AST] = {}
    nodes = sorted(
        (n for n in _own_nodes(scope) if isinstance(n, (ast.Assign, ast.AugAssign, ast.AnnAssign))),
        key=lambda n: (n.lineno, n.col_offset),
    )
    for node in nodes:
        if isinstance(node, ast.AugAssign) and isinstance(node.target, ast.Name):
            if isinstance(node.op, ast.Add):
                out[node.target.id] = ast.BinOp(left=ast.Constant(""), op=ast.Add(), right=node.value)
        elif isinstance(node, ast.Assign):
            for t in node.targets:
                if isinstance(t, ast.Name):
                    out[t.id] = node.value
        elif isinstance(node, ast.AnnAssign) and isinstance(node.target, ast.Name) and node.value:
            out[node.target.id] = node.value
    return out


def _is_literal(node: ast.AST) -> bool:
    return isinstance(node, ast.Constant) or (
        isinstance(node, ast.JoinedStr) and not any(isinstance(v, ast.FormattedValue) for v in node.values)
    )


def _python_findings(source: str, hygiene: bool) -> list[Finding]:
    tree = parse_module(source)
    found: list[Finding] = []
    for scope in _scopes(tree):
        assigned = _assignments(scope)
        nodes = list(_own_nodes(scope))
        calls = [n for n in nodes if isinstance(n, ast.Call)]
        for call in calls:
            name = dotted_name(call.func)
            short = name.rsplit(".", 1)[-1]
            first = call.args[0] if call.args else None
            if short in SQL_SINKS and first is not None and "." in name:
                kind = _string_kind(first, assigned)
                if kind == "concat":
                    found.append(_finding("sql-concat", call.lineno))
                elif kind == "format":
                    found.append(_finding("sql-format", call.lineno))
            elif name in ("eval", "exec") and first is not None and not _is_literal(first):
                found.append(_finding("eval-exec", call.lineno))
            elif name in DESERIALIZERS or (name == "yaml.load" and not _safe_yaml(call)):
                found.append(_finding("unsafe-deserialization", call.lineno))
            elif name in SHELL_CALLS and first is not None and not _is_literal(first):
                if any(k.arg == "shell" and isinstance(k.value, ast.Constant) and k.value.value is True
                       for k in call.keywords):
                    found.append(_finding("shell-injection", call.lineno))
            elif name in ("os.system", "os.popen") and first is not None and not _is_literal(first):
                found.append(_finding("shell-injection", call.lineno))
            elif name in ("hashlib.md5", "hashlib.sha1"):
                found.append(_finding("weak-hash", call.lineno))
            elif name == "hashlib.new" and first is not None and isinstance(first, ast.Constant):
                if str(first.value).lower() in ("md5", "sha1"):
                    found.append(_finding("weak-hash", call.lineno))
            elif name in ("open", "io.open") and first is not None:
                if _unvalidated_join(first, call, assigned, calls):
                    found.append(_finding("path-traversal", call.lineno))
        for node in nodes:
            if isinstance(node, (ast.Assign, ast.AnnAssign)):
                targets = node.targets if isinstance(node, ast.Assign) else [node.target]
                value = node.value
                if isinstance(value, ast.Constant) and isinstance(value.value, str) and len(value.value) >= 8:
                    for t in targets:
                        tname = t.id if isinstance(t, ast.Name) else getattr(t, "attr", "")
                        if SECRET_NAME.search(tname):
                            found.append(_finding("hardcoded-secret", node.lineno))
                            break
            elif hygiene and isinstance(node, ast.ExceptHandler):
                if node.type is None:
                    found.append(_finding("bare-except", node.lineno))
                if all(_is_noop(s) for s in node.body):
                    found.append(_finding("empty-except", node.lineno))
    return found


def _is_noop(stmt: ast.stmt) -> bool:
    return isinstance(stmt, (ast.Pass, ast.Continue)) or (
        isinstance(stmt, ast.Expr) and isinstance(stmt.value, ast.Constant)
    )


def _safe_yaml(call: ast.Call) -> bool:
    for k in call.keywords:
        if k.arg == "Loader" and "Safe" in dotted_name(k.value):
            return True
    return len(call.args) > 1 and "Safe" in dotted_name(call.args[1])


def _unvalidated_join(first: ast.AST, call: ast.Call, assigned: dict[str, ast.AST], calls: list[ast.Call]) -> bool:
    expr = first
    if isinstance(first, ast.Name) and first.id in assigned:
        expr = assigned[first.id]
    if not (isinstance(expr, ast.Call) and dotted_name(expr.func) in ("os.path.join", "posixpath.join")):
        return False
    variable = set()
    for a in expr.args:
        if not _is_literal(a):
            variable |= names_in(a)
    if not variable:
        return False
    watched = variable | ({first.id} if isinstance(first, ast.Name) else set())
    for other in calls:
        if other is call or other is expr or other.lineno > call.lineno:
            continue
        short = dotted_name(other.func).rsplit(".", 1)[-1]
        if short in ("join", "open"):
            continue
        if short in NORMALIZERS or any(names_in(a) & watched for a in other.args):
            return False
    return True


# ---------------------------------------------------------------------------
# java
# ---------------------------------------------------------------------------

_J_CONCAT_VAR = re.compile(r"(\w+)\s*=\s*\"[^\"]*\"\s*\+\s*\w")
_J_SQL_CALL = re.compile(r"\.(?:execute\w*|prepareStatement|addBatch)\s*\(\s*([^;]*?)\)\s*;")
_J_JAVA_RULES = [
    (re.compile(r"\.readObject\s*\("), "unsafe-deserialization", "ObjectInputStream"),
    (re.compile(r"Runtime\.getRuntime\(\)\.exec\s*\([^;]*\+"), "shell-injection", None),
    (re.compile(r"MessageDigest\.getInstance\(\s*\"(?:MD5|SHA-?1)\"", re.I), "weak-hash", None),
    (re.compile(r"new\s+File(?:InputStream|OutputStream|Reader)?\s*\([^;]*\+"), "path-traversal", None),
]


def _java_findings(source: str, hygiene: bool) -> list[Finding]:
    from anchorgate.frontend.java import mask

    masked = mask(source)

    def line(pos: int) -> int:
        return source.count("\n", 0, pos) + 1

    def live(pos: int) -> bool:  # not inside a comment
        return masked[pos] == source[pos]

    found = []
    concat_vars = {m.group(1) for m in _J_CONCAT_VAR.finditer(source) if live(m.start())}
    for m in _J_SQL_CALL.finditer(source):
        if not live(m.start()):
            continue
        arg = m.group(1).split(",")[0].strip()
        if ('"' in arg and "+" in arg) or arg in concat_vars:
            found.append(_finding("sql-concat", line(m.start())))
        elif "String.format" in arg:
            found.append(_finding("sql-format", line(m.start())))
    for pattern, rule_id, requires in _J_JAVA_RULES:
        if requires and requires not in source:
            continue
        for m in pattern.finditer(source):
            if live(m.start()):
                found.append(_finding(rule_id, line(m.start())))
    if hygiene:
        for m in re.finditer(r"catch\s*\([^)]*\)\s*\{\s*\}", masked):
            found.append(_finding("empty-except", line(m.start())))
    return found


class BuiltinAnalyzer:
    name = "builtin"

    def __init__(self, hygiene_rules: bool = False):
        self.hygiene_rules = hygiene_rules
        self._cache: dict[tuple[str, str], tuple[Finding, ...]] = {}

    def findings(self, snapshot: CodeSnapshot) -> list[Finding]:
        key = (snapshot.language.value, snapshot.source)
        cached = self._cache.get(key)
        if cached is None:
            if snapshot.language is Language.PYTHON:
                raw = _python_findings(snapshot.source, self.hygiene_rules)
            else:
                raw = _java_findings(snapshot.source, self.hygiene_rules)
            cached = tuple(sorted(set(raw), key=lambda f: (f.line, f.rule_id)))
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = cached
        return list(cached)
