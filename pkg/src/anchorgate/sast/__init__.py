"""Static-analysis backends, severity tallies and the risk density."""

from __future__ import annotations

from typing import Protocol

from anchorgate.model import CodeSnapshot, Finding, RiskProfile, SeverityCounts
from anchorgate.sast.builtin import RULES, BuiltinAnalyzer
from anchorgate.sast.external import ExternalAnalyzer, parse_semgrep_json
from anchorgate.sast.risk import DEFAULT_WEIGHTS, compute_rho, compute_risk

__all__ = [
    "Analyzer",
    "BuiltinAnalyzer",
    "ExternalAnalyzer",
    "RULES",
    "DEFAULT_WEIGHTS",
    "analyze",
    "compute_risk",
    "compute_rho",
    "new_findings",
    "parse_semgrep_json",
]


class Analyzer(Protocol):
    name: str

    def findings(self, snapshot: CodeSnapshot) -> list[Finding]: ...


def analyze(
    snapshot: CodeSnapshot,
    backend: Analyzer | None = None,
    weights: dict[str, float] | None = None,
) -> tuple[list[Finding], RiskProfile]:
    findings = (backend or BuiltinAnalyzer()).findings(snapshot)
    counts = SeverityCounts.from_findings(findings)
    risk = compute_risk(counts, weights)
    return findings, RiskProfile(counts, risk, compute_rho(risk, snapshot.loc), snapshot.loc)


def new_findings(prev: list[Finding], curr: list[Finding]) -> list[Finding]:
    """Findings of ``curr`` in excess of ``prev``, matched per rule id (line numbers drift)."""
    budget: dict[str, int] = {}
    for f in prev:
        budget[f.rule_id] = budget.get(f.rule_id, 0) + 1
    out = []
    for f in curr:
        if budget.get(f.rule_id, 0) > 0:
            budget[f.rule_id] -= 1
        else:
            out.append(f)
    return out
