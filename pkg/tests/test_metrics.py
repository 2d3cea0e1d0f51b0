import json
import random

import pytest

from anchorgate.errors import PairMissing, UndefinedMetric
from anchorgate.metrics import (
    MECHANISM_COLUMNS,
    OUTCOME_COLUMNS,
    SUMMARY_FIELDS,
    ablation_summaries,
    compute_cer,
    compute_delta_v,
    compute_dr,
    compute_fsr,
    compute_rer,
    compute_smr,
    compute_ssdr_rdr,
    compute_utility,
    render_table,
    summarize,
    write_comparison,
    write_summary,
)
from anchorgate.model import FailureType, Mode, Scope

from metric_oracle import PlainAttempt, PlainChain, PlainIteration, agree, build_all, oracle, random_chain_set

ACCEPT = PlainAttempt(True, False, 3, 1, None, True, False)
REJECT_A = PlainAttempt(False, False, 5, 5, (FailureType.ANCHOR_VIOLATION, "validate"), True, True)


def chains_with(series_list):
    """One chain per V series (critical+high), every step committed."""
    plain = []
    for series in series_list:
        pc = PlainChain((0, series[0], 0, 0), 1, 1)
        pc.iterations = [PlainIteration([ACCEPT], (0, v, 0, 0), 0, None) for v in series[1:]]
        plain.append(pc)
    return build_all(plain)


@pytest.mark.parametrize(
    "series_list, dr",
    [
        ([[1, 1, 1]], 0.0),
        ([[1, 2, 1]], 0.0),  # transient increase does not count
        ([[1, 1, 2]], 1.0),
        ([[0, 1], [2, 1], [1, 1], [0, 0]], 0.25),
    ],
)
def test_degradation_rate(series_list, dr):
    assert compute_dr(chains_with(series_list)) == dr


@pytest.mark.parametrize(
    "series_list, smr",
    [
        ([[3, 3, 2, 2]], 1.0),
        ([[1, 2, 1]], 0.5),
        ([[0, 1], [1, 1, 1, 1]], 0.75),  # pooled over four steps
    ],
)
def test_safety_monotonicity_rate(series_list, smr):
    assert compute_smr(chains_with(series_list)) == smr


def test_rolled_back_steps_are_not_steps():
    pc = PlainChain((0, 1, 0, 0), 1, 1, [PlainIteration([REJECT_A], None, 0, None),
                                          PlainIteration([ACCEPT], (0, 1, 0, 0), 0, None)])
    (c,) = build_all([pc])
    assert c.committed_series(Scope.CRITICAL_HIGH) == [1, 1]
    assert compute_smr([c]) == 1.0


def test_delta_v_mean():
    assert compute_delta_v(chains_with([[1, 3], [2, 1]])) == 0.5


def test_scope_all_counts_medium_and_low():
    pc = PlainChain((0, 0, 0, 0), 1, 1, [PlainIteration([ACCEPT], (0, 0, 2, 0), 0, None)])
    chains = build_all([pc])
    assert compute_dr(chains, Scope.CRITICAL_HIGH) == 0.0
    assert compute_dr(chains, Scope.ALL) == 1.0


def test_undefined_metrics_raise():
    with pytest.raises(UndefinedMetric):
        compute_dr([])
    with pytest.raises(UndefinedMetric):
        compute_smr(chains_with([[1]]))
    with pytest.raises(UndefinedMetric):
        compute_ssdr_rdr(chains_with([[1, 1]]))


def test_review_metrics():
    plain = [PlainChain((0, 0, 0, 0), 0, 0, reviews=r) for r in [(1, 0, 2, 0), (1, 1, 1, 3), (2, 2, 1, 1)]]
    plain.append(PlainChain((0, 0, 0, 0), 0, 0))  # unreviewed, excluded
    ssdr, rdr, ds, dr = compute_ssdr_rdr(build_all(plain))
    assert (ssdr, rdr) == (pytest.approx(1 / 3), pytest.approx(1 / 3))
    assert (ds, dr) == (0.0, pytest.approx(1 / 3))


def test_utility_counts_committed_and_attempted_churn():
    gen_err = PlainAttempt(False, True, 0, 0, None, False, False)
    pc = PlainChain((0, 0, 0, 0), 1, 3, [
        PlainIteration([REJECT_A, gen_err, ACCEPT], (0, 0, 0, 0), 0, None),
        PlainIteration([REJECT_A], None, 0, None),
    ])
    assert compute_utility(build_all([pc])) == (4, 24, 2.0)


def test_fsr_rer_and_cer():
    retry_then_commit = PlainIteration([REJECT_A, ACCEPT], (0, 0, 0, 0), 0, None)
    retry_then_fail = PlainIteration([REJECT_A, REJECT_A], None, 0, None)
    clean = PlainIteration([ACCEPT], (0, 0, 0, 0), 0, None)
    full = build_all([PlainChain((0, 0, 0, 0), 0, 0, [retry_then_commit, clean, retry_then_commit])])
    noassim = build_all([PlainChain((0, 0, 0, 0), 0, 0, [retry_then_fail, retry_then_commit])])
    assert compute_fsr(full) == 1.0 and compute_fsr(noassim) == 0.5
    assert compute_rer(full) == 0.5  # second occurrence of the same signature repeats
    assert compute_cer(full, noassim) == 0.5
    with pytest.raises(PairMissing):
        compute_cer(full, None)


def test_fsr_undefined_without_rejections():
    assert compute_fsr(chains_with([[0, 0]])) is None


@pytest.mark.parametrize("seed", range(60))
def test_metrics_agree_with_oracle(seed):
    rng = random.Random(seed)
    plain, paired = random_chain_set(rng), random_chain_set(rng)
    expected = oracle(plain, paired)
    summary = summarize(build_all(plain), "x", build_all(paired))
    mismatches = {k: (v, getattr(summary, k)) for k, v in expected.items() if not agree(v, getattr(summary, k))}
    assert mismatches == {}


def test_summary_and_comparison_files(tmp_path):
    chains = chains_with([[1, 1], [1, 2]])
    s = summarize(chains, "full")
    write_summary(tmp_path, s, chains)
    data = json.loads((tmp_path / "summary.data").read_text())
    assert set(data["summary"]) == set(SUMMARY_FIELDS)
    assert data["chains"][1]["v_committed_ch"] == [1, 2]
    assert "dr" in (tmp_path / "summary.txt").read_text()

    runs = {Mode.BASELINE: chains, Mode.NO_ASSIMILATION: chains, Mode.FULL: chains}
    summaries = ablation_summaries(runs)
    assert [x.label for x in summaries] == ["baseline", "no_assimilation", "full"]
    text = write_comparison(tmp_path, summaries)
    rows = json.loads((tmp_path / "comparison.data").read_text())["rows"]
    assert [r["label"] for r in rows] == ["baseline", "no_assimilation", "full"]
    assert "outcome metrics" in text and "mechanism metrics" in text


def test_table_rendering_formats_percent_and_missing():
    s = summarize(chains_with([[1, 2], [1, 1]]), "gate_only")
    table = render_table([s], ("dr", "fsr", "delta_v"))
    header, rule, row = table.splitlines()
    assert header.split() == ["setting", "dr", "fsr", "delta_v"]
    assert row.split() == ["gate_only", "50.00%", "-", "0.500"]
    assert OUTCOME_COLUMNS[0] == "dr" and MECHANISM_COLUMNS[-1] == "dr"
