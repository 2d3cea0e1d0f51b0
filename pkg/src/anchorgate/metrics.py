"""Run-level evaluation metrics and report rendering.

Conventions (shared by every metric):

* an attempt counts as rejected when it was not accepted, generation
  failures included (they consume retry budget);
* CEV sums the diffs of committed steps; CEV_attempted adds every
  evaluated attempt;
* undefined ratios (zero denominator) are reported as ``None``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from anchorgate.errors import PairMissing, ParseError, UndefinedMetric
from anchorgate.frontend import public_interfaces
from anchorgate.model import SCHEMA_VERSION, ChainRecord, Mode, Scope, atomic_write_text


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def _mean(values: Sequence[float | int | Fraction]) -> float | None:
    return None if not values else float(sum(Fraction(v) for v in values) / len(values))


# ---------------------------------------------------------------------------
# outcome metrics
# ---------------------------------------------------------------------------


def compute_dr(chains: Sequence[ChainRecord], scope: Scope = Scope.CRITICAL_HIGH) -> float:
    if not chains:
        raise UndefinedMetric("degradation rate of an empty chain set")
    worse = sum(1 for c in chains if c.v_final.of_scope(scope) > c.v_baseline.of_scope(scope))
    return worse / len(chains)


def compute_smr(chains: Sequence[ChainRecord], scope: Scope = Scope.CRITICAL_HIGH) -> float:
    """Share of committed steps that do not increase the vulnerability count, pooled over chains."""
    good = total = 0
    for c in chains:
        series = c.committed_series(scope)
        for before, after in zip(series, series[1:]):
            total += 1
            good += after <= before
    if total == 0:
        raise UndefinedMetric("no committed steps")
    return good / total


def compute_delta_v(chains: Sequence[ChainRecord], scope: Scope = Scope.CRITICAL_HIGH) -> float:
    if not chains:
        raise UndefinedMetric("mean vulnerability change of an empty chain set")
    return _mean([c.v_final.of_scope(scope) - c.v_baseline.of_scope(scope) for c in chains])


def reviewed(chains: Iterable[ChainRecord]) -> list[ChainRecord]:
    return [c for c in chains if c.baseline_review is not None and c.final_review is not None]


def compute_ssdr_rdr(chains: Sequence[ChainRecord]) -> tuple[float, float, float, float]:
    """(SSDR, RDR, mean S change, mean R change) over chains with both reviews."""
    rc = reviewed(chains)
    if not rc:
        raise UndefinedMetric("no chain has both reviews")
    s_up = sum(1 for c in rc if c.final_review.s_count > c.baseline_review.s_count)
    r_up = sum(1 for c in rc if c.final_review.r_count > c.baseline_review.r_count)
    ds = _mean([c.final_review.s_count - c.baseline_review.s_count for c in rc])
    dr = _mean([c.final_review.r_count - c.baseline_review.r_count for c in rc])
    return s_up / len(rc), r_up / len(rc), ds, dr


def new_interfaces(chain: ChainRecord) -> int:
    try:
        return len(public_interfaces(chain.final_snapshot) - public_interfaces(chain.baseline))
    except ParseError:
        return 0


def compute_utility(chains: Sequence[ChainRecord]) -> tuple[int, int, float]:
    """(CEV over committed steps, CEV over every evaluated attempt, mean new public interfaces)."""
    cev = cev_attempted = 0
    for c in chains:
        for it in c.iterations:
            for a in it.attempts:
                if a.evaluated:
                    cev_attempted += a.diff.churn
            if it.committed:
                cev += it.attempts[-1].diff.churn
    delta_f = _mean([new_interfaces(c) for c in chains]) or 0.0
    return cev, cev_attempted, delta_f


# ---------------------------------------------------------------------------
# mechanism metrics
# ---------------------------------------------------------------------------


def compute_ac(chains: Sequence[ChainRecord]) -> tuple[float | None, float | None]:
    """(mean anchor count per chain, mean anchor coverage) over anchor-enabled chains."""
    anchored = [c for c in chains if c.anchors_enabled and c.iterations]
    per_chain = [_mean([it.anchor_count for it in c.iterations]) for c in anchored]
    coverage = [it.anchor_coverage for c in anchored for it in c.iterations if it.anchor_coverage is not None]
    return _mean([v for v in per_chain if v is not None]), _mean(coverage)


def compute_avr(chains: Sequence[ChainRecord]) -> float | None:
    checked = [a for c in chains if c.anchors_enabled for it in c.iterations for a in it.attempts if a.anchors_checked]
    return _ratio(sum(1 for a in checked if a.anchor_violations), len(checked))


def compute_fsr(chains: Sequence[ChainRecord]) -> float | None:
    troubled = [it for c in chains for it in c.iterations if it.rejections > 0]
    return _ratio(sum(1 for it in troubled if it.committed), len(troubled))


def compute_rer(chains: Sequence[ChainRecord]) -> float | None:
    failures = repeats = 0
    for c in chains:
        seen: set[tuple[str, str]] = set()
        for it in c.iterations:
            for a in it.attempts:
                if a.counterexample is None:
                    continue
                failures += 1
                sig = a.counterexample.signature
                repeats += sig in seen
                seen.add(sig)
    return _ratio(repeats, failures)


def compute_tcr(chains: Sequence[ChainRecord]) -> float | None:
    its = [it for c in chains for it in c.iterations]
    return _ratio(sum(1 for it in its if it.committed), len(its))


def compute_rr(chains: Sequence[ChainRecord]) -> float | None:
    attempts = [a for c in chains for it in c.iterations for a in it.attempts]
    return _ratio(sum(1 for a in attempts if a.rejected), len(attempts))


def compute_cer(chains: Sequence[ChainRecord], paired: Sequence[ChainRecord] | None) -> float | None:
    """FSR difference against a paired run that differs only in assimilation (percentage points / 100)."""
    if paired is None:
        raise PairMissing("counterexample effectiveness needs a paired run without assimilation")
    a, b = compute_fsr(chains), compute_fsr(paired)
    return None if a is None or b is None else a - b


def compute_mechanism(chains: Sequence[ChainRecord], paired: Sequence[ChainRecord] | None = None) -> dict:
    ac, ac_cov = compute_ac(chains)
    return {
        "ac": ac,
        "ac_coverage": ac_cov,
        "avr": compute_avr(chains),
        "fsr": compute_fsr(chains),
        "rer": compute_rer(chains),
        "tcr": compute_tcr(chains),
        "rr": compute_rr(chains),
        "cer": compute_cer(chains, paired) if paired is not None else None,
    }


# ---------------------------------------------------------------------------
# summary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunSummary:
    label: str
    n_chains: int
    n_reviewed: int
    dr: float | None
    dr_all: float | None
    smr: float | None
    smr_all: float | None
    delta_v: float | None
    ssdr: float | None
    rdr: float | None
    delta_s: float | None
    delta_r: float | None
    cev: int
    cev_attempted: int
    delta_f: float
    ac: float | None
    ac_coverage: float | None
    avr: float | None
    fsr: float | None
    rer: float | None
    tcr: float | None
    rr: float | None
    cer: float | None = None


def _safe(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetric:
        return None


def summarize(chains: Sequence[ChainRecord], label: str = "", paired: Sequence[ChainRecord] | None = None) -> RunSummary:
    ssdr = _safe(compute_ssdr_rdr, chains) or (None, None, None, None)
    cev, cev_att, delta_f = compute_utility(chains)
    mech = compute_mechanism(chains, paired)
    return RunSummary(
        label=label,
        n_chains=len(chains),
        n_reviewed=len(reviewed(chains)),
        dr=_safe(compute_dr, chains, Scope.CRITICAL_HIGH),
        dr_all=_safe(compute_dr, chains, Scope.ALL),
        smr=_safe(compute_smr, chains, Scope.CRITICAL_HIGH),
        smr_all=_safe(compute_smr, chains, Scope.ALL),
        delta_v=_safe(compute_delta_v, chains, Scope.CRITICAL_HIGH),
        ssdr=ssdr[0],
        rdr=ssdr[1],
        delta_s=ssdr[2],
        delta_r=ssdr[3],
        cev=cev,
        cev_attempted=cev_att,
        delta_f=delta_f,
        **mech,
    )


# Column orders for the outcome table and the mechanism table.
OUTCOME_COLUMNS = ("dr", "dr_all", "smr", "delta_v", "ssdr", "rdr", "delta_s", "delta_r", "cev", "delta_f")
MECHANISM_COLUMNS = ("ac", "avr", "fsr", "rer", "tcr", "rr", "cer", "dr")
PERCENT = {"dr", "dr_all", "smr", "smr_all", "ssdr", "rdr", "avr", "fsr", "rer", "tcr", "rr", "ac_coverage"}


def _fmt(name: str, value) -> str:
    if value is None:
        return "-"
    if name in PERCENT:
        return f"{100 * value:.2f}%"
    if name == "cer":
        return f"{100 * value:+.2f}%"
    if isinstance(value, int):
        return str(value)
    return f"{value:.3f}"


def render_table(summaries: Sequence[RunSummary], columns: Sequence[str]) -> str:
    header = ["setting", *columns]
    rows = [[s.label, *(_fmt(c, getattr(s, c)) for c in columns)] for s in summaries]
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths))) for r in [header, *rows]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def chain_series(chains: Sequence[ChainRecord]) -> list[dict]:
    return [
        {
            "chain_id": c.chain_id,
            "status": c.status.value,
            "v_committed_ch": c.committed_series(Scope.CRITICAL_HIGH),
            "v_committed_all": c.committed_series(Scope.ALL),
            "v_iteration_ch": c.iteration_series(Scope.CRITICAL_HIGH),
        }
        for c in chains
    ]


def summary_data(summary: RunSummary, chains: Sequence[ChainRecord]) -> dict:
    return {"schema_version": SCHEMA_VERSION, "summary": asdict(summary), "chains": chain_series(chains)}


def render_summary_text(summary: RunSummary, chains: Sequence[ChainRecord]) -> str:
    parts = [
        f"run: {summary.label or '-'}   chains: {summary.n_chains}   reviewed: {summary.n_reviewed}",
        "",
        render_table([summary], OUTCOME_COLUMNS),
        render_table([summary], MECHANISM_COLUMNS),
        "per-chain critical+high vulnerability count over committed states:",
    ]
    for row in chain_series(chains):
        parts.append(f"  {row['chain_id']}: {' '.join(map(str, row['v_committed_ch']))}")
    return "\n".join(parts) + "\n"


def write_summary(out_dir: str | Path, summary: RunSummary, chains: Sequence[ChainRecord]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "summary.txt", render_summary_text(summary, chains))
    atomic_write_text(out / "summary.data", json.dumps(summary_data(summary, chains), indent=2, sort_keys=True) + "\n")


def ablation_summaries(runs: dict[Mode, Sequence[ChainRecord]]) -> list[RunSummary]:
    """One summary per mode in the given order; Full is paired with NoAssimilation for CER."""
    paired = runs.get(Mode.NO_ASSIMILATION)
    return [
        summarize(chains, mode.value, paired if mode is Mode.FULL and paired is not None else None)
        for mode, chains in runs.items()
    ]


def write_comparison(out_dir: str | Path, summaries: Sequence[RunSummary]) -> str:
    text = (
        "outcome metrics\n" + render_table(summaries, OUTCOME_COLUMNS) + "\n"
        "mechanism metrics\n" + render_table(summaries, MECHANISM_COLUMNS)
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "comparison.txt", text)
    data = {"schema_version": SCHEMA_VERSION, "rows": [asdict(s) for s in summaries]}
    atomic_write_text(out / "comparison.data", json.dumps(data, indent=2, sort_keys=True) + "\n")
    return text


SUMMARY_FIELDS = tuple(f.name for f in fields(RunSummary))
