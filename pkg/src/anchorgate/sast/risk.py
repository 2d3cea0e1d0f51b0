from __future__ import annotations

from anchorgate.model import SeverityCounts

DEFAULT_WEIGHTS: dict[str, float] = {"critical": 8.0, "high": 5.0, "medium": 2.0, "low": 1.0}


def compute_risk(counts: SeverityCounts, weights: dict[str, float] | None = None) -> float:
    """Severity-weighted finding total (SAST_Risk)."""
    w = DEFAULT_WEIGHTS if weights is None else weights
    return (
        counts.critical * w["critical"]
        + counts.high * w["high"]
        + counts.medium * w["medium"]
        + counts.low * w["low"]
    )


def compute_rho(risk: float, loc: int) -> float:
    """Risk density per thousand lines; LOC is clamped to at least 1."""
    if risk < 0 or loc < 0:
        raise ValueError("risk and loc must be non-negative")
    return 1000.0 * risk / max(loc, 1)
