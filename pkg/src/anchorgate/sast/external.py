"""Subprocess adapter for external scanners emitting Semgrep-style JSON."""

from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
from pathlib import Path

from anchorgate.errors import BackendProtocolError, BackendUnavailable
from anchorgate.model import CodeSnapshot, Finding, Severity

SEMGREP_COMMAND = "semgrep scan --config p/default --json --quiet --metrics off {path}"
SEMGREP_SEVERITY = {
    "CRITICAL": Severity.CRITICAL,
    "ERROR": Severity.HIGH,
    "HIGH": Severity.HIGH,
    "WARNING": Severity.MEDIUM,
    "MEDIUM": Severity.MEDIUM,
    "INFO": Severity.LOW,
    "LOW": Severity.LOW,
    "INVENTORY": Severity.LOW,
    "EXPERIMENT": Severity.LOW,
}


def parse_semgrep_json(text: str, severity_map: dict[str, Severity] | None = None) -> list[Finding]:
    table = SEMGREP_SEVERITY if severity_map is None else severity_map
    try:
        data = json.loads(text)
        results = data["results"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise BackendProtocolError(f"scanner output is not Semgrep JSON: {exc}") from None
    findings = []
    for r in results:
        try:
            raw_sev = str(r["extra"]["severity"]).upper()
            line = int(r["start"]["line"])
            rule_id = str(r["check_id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendProtocolError(f"malformed result entry: {exc}") from None
        if raw_sev not in table:
            raise BackendProtocolError(f"unmapped severity {raw_sev!r} for {rule_id}")
        findings.append(Finding(rule_id, table[raw_sev], max(line, 1), str(r["extra"].get("message", ""))))
    return sorted(findings, key=lambda f: (f.line, f.rule_id))


class ExternalAnalyzer:
    """Runs ``command`` (with ``{path}`` placeholder) on a temp copy of the snapshot."""

    name = "external"

    def __init__(
        self,
        command: str = SEMGREP_COMMAND,
        severity_map: dict[str, Severity] | None = None,
        timeout_s: float = 300.0,
    ):
        self.command = command
        self.severity_map = severity_map
        self.timeout_s = timeout_s
        self._cache: dict[tuple[str, str], tuple[Finding, ...]] = {}

    def findings(self, snapshot: CodeSnapshot) -> list[Finding]:
        key = (snapshot.language.value, snapshot.source)
        if key not in self._cache:
            self._cache[key] = tuple(self._scan(snapshot))
        return list(self._cache[key])

    def _scan(self, snapshot: CodeSnapshot) -> list[Finding]:
        with tempfile.TemporaryDirectory(prefix="anchorgate-scan-") as tmp:
            path = Path(tmp) / f"code{snapshot.language.extension}"
            path.write_text(snapshot.source, encoding="utf-8")
            argv = [part.replace("{path}", str(path)) for part in shlex.split(self.command)]
            try:
                proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout_s, cwd=tmp)
            except FileNotFoundError:
                raise BackendUnavailable(f"scanner not found: {argv[0]}") from None
            except subprocess.TimeoutExpired:
                raise BackendUnavailable(f"scanner timed out after {self.timeout_s}s") from None
        if proc.returncode not in (0, 1):
            raise BackendProtocolError(f"scanner exited {proc.returncode}: {proc.stderr.strip()[:400]}")
        return parse_semgrep_json(proc.stdout, self.severity_map)
