import pytest
from hypothesis import given
from hypothesis import strategies as st

from anchorgate.anchors import mine_anchors
from anchorgate.errors import ConfigError
from anchorgate.gate import (
    GateConfig,
    GateContext,
    TestHarness,
    TestRunner,
    budget_overruns,
    check_diff_budget,
    check_safety,
    decide,
    parse_failing_tests,
    run_gate,
)
from anchorgate.model import (
    LAYERS,
    CodeSnapshot,
    Decision,
    DiffStats,
    GateVerdict,
    RiskProfile,
    Scope,
    SecuritySpec,
    SeverityCounts,
)
from anchorgate.sast import ExternalAnalyzer

from conftest import FIXTURES, py

CFG = GateConfig()


def profile(critical=0, high=0, medium=0, low=0, rho=0.0, loc=100):
    counts = SeverityCounts(critical, high, medium, low)
    return RiskProfile(counts, 8 * critical + 5 * high + 2 * medium + low, rho, loc)


# ---------------------------------------------------------------------------
# safety
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "prev, curr, cfg, expected",
    [
        (profile(), profile(), CFG, GateVerdict.PASS),
        (profile(), profile(high=1, rho=50), CFG, GateVerdict.FAIL_RETRY),
        (profile(high=2, rho=100), profile(high=1, rho=50), CFG, GateVerdict.PASS),
        (profile(), profile(medium=1, rho=20), CFG, GateVerdict.FAIL_RETRY),  # density grows
        (profile(), profile(medium=1, rho=20), GateConfig(epsilon=25), GateVerdict.PASS),
        (profile(), profile(high=1, rho=50), GateConfig(delta_max=1, epsilon=50), GateVerdict.PASS),
        (profile(), profile(high=2, rho=50), GateConfig(delta_max=1, epsilon=50), GateVerdict.FAIL_RETRY),
        (profile(rho=10, loc=100), profile(rho=5, loc=200), CFG, GateVerdict.PASS),
        (profile(critical=1, rho=80), profile(high=1, rho=80), CFG, GateVerdict.PASS),  # same count in scope
        (profile(low=1, rho=10), profile(critical=1, rho=80), CFG, GateVerdict.FAIL_RETRY),
    ],
)
def test_safety_layer(prev, curr, cfg, expected):
    assert check_safety(prev, curr, cfg)[0] is expected


def test_safety_reports_deltas():
    _, d_count, d_rho = check_safety(profile(high=1, rho=50), profile(high=3, rho=70), CFG)
    assert (d_count, d_rho) == (2, 20)


def test_safety_scope_all_counts_low_findings():
    cfg = GateConfig(severity_scope=Scope.ALL, epsilon=100)
    assert check_safety(profile(), profile(low=1, rho=10), cfg)[0] is GateVerdict.FAIL_RETRY
    assert check_safety(profile(), profile(low=1, rho=10), GateConfig(epsilon=100))[0] is GateVerdict.PASS


# ---------------------------------------------------------------------------
# diff budget and decisions
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "added, deleted, expected",
    [(0, 0, GateVerdict.PASS), (150, 100, GateVerdict.PASS), (151, 0, GateVerdict.FAIL_RETRY), (0, 101, GateVerdict.FAIL_RETRY)],
)
def test_diff_budget(added, deleted, expected):
    assert check_diff_budget(DiffStats(added, deleted), CFG) is expected


def test_budget_overrun_messages():
    assert budget_overruns(DiffStats(200, 300), CFG) == ("L_add 200 > 150", "L_del 300 > 100")


@pytest.mark.parametrize(
    "verdicts, attempt, expected",
    [
        ([GateVerdict.PASS] * 4, 0, Decision.ACCEPT),
        ([GateVerdict.PASS, GateVerdict.WARN], 2, Decision.ACCEPT),
        ([GateVerdict.FAIL_RETRY], 0, Decision.RETRY),
        ([GateVerdict.FAIL_RETRY], 1, Decision.RETRY),
        ([GateVerdict.FAIL_RETRY], 2, Decision.ROLLBACK),
        ([GateVerdict.FAIL], 0, Decision.ROLLBACK),
        ([GateVerdict.FAIL_RETRY, GateVerdict.FAIL], 0, Decision.ROLLBACK),
        ([], 0, Decision.ACCEPT),
    ],
)
def test_decide(verdicts, attempt, expected):
    assert decide(verdicts, attempt, r_max=3) is expected


@given(st.lists(st.sampled_from(list(GateVerdict)), max_size=4), st.integers(0, 5), st.integers(1, 5))
def test_decide_never_retries_past_budget(verdicts, attempt, r_max):
    d = decide(verdicts, attempt, r_max)
    if d is Decision.RETRY:
        assert attempt + 1 < r_max and GateVerdict.FAIL not in verdicts


def test_gate_config_validation():
    with pytest.raises(ValueError):
        GateConfig(r_max=0)
    with pytest.raises(ValueError):
        GateConfig(b_add=-1)


# ---------------------------------------------------------------------------
# correctness
# ---------------------------------------------------------------------------


def test_parse_failing_tests():
    out = (
        "FAILED tests/test_code.py::test_a - assert 1 == 2\n"
        "FAIL: test_b (test_code.CodeTests)\n"
        "ERROR: test_c (test_code.CodeTests)\n"
        "1) testD(org.FooTest)\n"
        "FAILED (failures=1, errors=1)\n"
    )
    assert parse_failing_tests(out) == (
        "tests/test_code.py::test_a",
        "test_code.CodeTests.test_b",
        "test_code.CodeTests.test_c",
        "org.FooTest.testD",
    )


def _harness(tmp_path, body, timeout=30.0):
    tests = tmp_path / "tests"
    tests.mkdir()
    (tests / "test_code.py").write_text(
        "import importlib.util, pathlib, unittest\n"
        "spec = importlib.util.spec_from_file_location('code_under_test', pathlib.Path(__file__).parent.parent / 'code.py')\n"
        "mod = importlib.util.module_from_spec(spec); spec.loader.exec_module(mod)\n"
        "class CodeTests(unittest.TestCase):\n" + body
    )
    return TestHarness(tests, "{python} -S -m unittest discover -s tests -q", timeout)


def test_correctness_pass_fail_and_memoization(tmp_path):
    harness = _harness(tmp_path, "    def test_double(self):\n        self.assertEqual(mod.double(2), 4)\n")
    runner = TestRunner()
    good = py("def double(x):\n    return 2 * x\n")
    bad = py("def double(x):\n    return x + 1\n")
    assert runner.run(good, harness).passed
    result = runner.run(bad, harness)
    assert not result.passed and result.failing_tests == ("test_code.CodeTests.test_double",)
    runner.run(good, harness)
    assert runner.executions == 2


def test_correctness_timeout(tmp_path):
    harness = _harness(tmp_path, "    def test_slow(self):\n        mod.spin()\n", timeout=1.0)
    result = TestRunner().run(py("def spin():\n    while True:\n        pass\n"), harness)
    assert result.timed_out and not result.passed


def test_missing_harness_is_configuration_error(tmp_path):
    with pytest.raises(ConfigError):
        TestRunner().run(py("x = 1\n"), TestHarness(tmp_path / "absent", "{python} -c pass"))
    with pytest.raises(ConfigError):
        TestRunner().run(py("x = 1\n"), TestHarness(tmp_path, "  "))


# ---------------------------------------------------------------------------
# full gate
# ---------------------------------------------------------------------------

PREV = py("""
    def find(conn, name):
        return conn.execute("SELECT * FROM t WHERE n = ?", (name,))
""")
INJECTED = py("""
    def find(conn, name):
        return conn.execute("SELECT * FROM t WHERE n = '" + name + "'")
""")


def test_clean_edit_is_accepted_by_every_layer(case1, runner):
    ctx = GateContext(harness=case1.harness, runner=runner)
    prev = case1.snapshot()
    cand = CodeSnapshot(prev.source + "\n\ndef customer_count(conn):\n    return 0\n")
    report = run_gate(prev, cand, mine_anchors(prev, case1.category), CFG, ctx=ctx)
    assert report.decision is Decision.ACCEPT
    assert all(getattr(report, layer) is GateVerdict.PASS for layer in LAYERS)


def test_injection_stops_at_safety_layer():
    report = run_gate(PREV, INJECTED, SecuritySpec(), CFG, layers=("safety", "diff_budget", "anchor_integrity"))
    assert report.safety is GateVerdict.FAIL_RETRY and report.failed_layer == "safety"
    assert report.diff_budget is None and report.anchor_integrity is None
    assert report.decision is Decision.RETRY and report.delta_ch == 1
    assert [f.rule_id for f in report.new_findings] == ["sql-concat"]


def test_last_attempt_rolls_back():
    report = run_gate(PREV, INJECTED, SecuritySpec(), CFG, layers=("safety",), attempt_index=2)
    assert report.decision is Decision.ROLLBACK


def test_anchor_layer_reports_checks(case1):
    prev = case1.snapshot()
    spec = mine_anchors(prev, case1.category)
    cand = CodeSnapshot(prev.source.replace("def validate_user_input(name)", "def check_input(name)"))
    report = run_gate(prev, cand, spec, CFG, layers=("anchor_integrity",))
    missing = [c for c in report.anchor_checks if not c.present]
    assert report.anchor_integrity is GateVerdict.FAIL_RETRY
    assert [c.selector for c in missing] == ["validate_user_input(name)"]


def test_correctness_without_harness_rolls_back():
    report = run_gate(PREV, PREV, SecuritySpec(), CFG, layers=("correctness",))
    assert report.correctness is GateVerdict.FAIL and report.decision is Decision.ROLLBACK


def test_unavailable_backend_rolls_back():
    ctx = GateContext(analyzer=ExternalAnalyzer("no-such-scanner-binary {path}"))
    report = run_gate(PREV, PREV, SecuritySpec(), CFG, ctx=ctx, layers=("safety",))
    assert report.decision is Decision.ROLLBACK and "BackendUnavailable" in report.diagnostic


def test_unparseable_candidate_retries():
    report = run_gate(PREV, py("def find(:\n"), SecuritySpec(), CFG, layers=("safety",))
    assert report.safety is GateVerdict.FAIL_RETRY


def test_unknown_layer_rejected():
    with pytest.raises(ConfigError):
        run_gate(PREV, PREV, SecuritySpec(), CFG, layers=("style",))


def test_stub_scanner_drives_safety_layer():
    import sys

    ctx = GateContext(analyzer=ExternalAnalyzer(f"{sys.executable} {FIXTURES / 'fake_semgrep.py'} {{path}}"))
    report = run_gate(PREV, INJECTED, SecuritySpec(), CFG, ctx=ctx, layers=("safety",))
    assert report.safety is GateVerdict.FAIL_RETRY


def test_runner_durations_are_masked():
    from anchorgate.gate import normalize_output

    assert normalize_output("Ran 2 tests in 0.004s\n") == "Ran 2 tests in <t>\n"
    assert normalize_output("=== 3 passed in 1.20s ===") == "=== 3 passed in <t> ==="
    assert normalize_output("found in 3 places") == "found in 3 places"
