import json
import shutil
import subprocess
import sys

import pytest

from anchorgate.cli import EXIT_OK, EXIT_PARTIAL, EXIT_RETRY, EXIT_ROLLBACK, EXIT_USAGE, main

PREV = 'def find(conn, name):\n    return conn.execute("SELECT * FROM t WHERE n = ?", (name,))\n'
INJECTED = 'def find(conn, name):\n    return conn.execute("SELECT * FROM t WHERE n = \'" + name + "\'")\n'
PICKLED = "import pickle\n\ndef load(request):\n    return pickle.loads(request.body)\n"


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return write


def test_gate_accept(files, capsys):
    assert main(["gate", files("a.py", PREV), files("b.py", PREV)]) == EXIT_OK
    out, err = capsys.readouterr()
    assert "decision: accept" in out and "correctness layer skipped" in err


def test_gate_retry_then_rollback_on_last_attempt(files, capsys):
    prev, cand = files("a.py", PREV), files("b.py", INJECTED)
    assert main(["gate", prev, cand]) == EXIT_RETRY
    assert "new finding sql-concat" in capsys.readouterr().out
    assert main(["gate", prev, cand, "--attempt", "2"]) == EXIT_ROLLBACK


def test_gate_with_critical_anchor_rolls_back(case1, tmp_path, capsys):
    spec_file = tmp_path / "spec.json"
    assert main(["mine", str(case1.path), "--critical", "validate_user_input(name)", "--json", str(spec_file)]) == EXIT_OK
    cand = tmp_path / "code.py"
    cand.write_text(case1.snapshot().source.replace("def validate_user_input(name)", "def check_name(name)"))
    code = main(["gate", str(case1.code_path), str(cand), "--spec", str(spec_file), "--layers", "anchor_integrity"])
    assert code == EXIT_ROLLBACK
    assert "anchor_integrity  fail" in capsys.readouterr().out


def test_gate_runs_tests_when_given(case1, tmp_path, capsys):
    cand = tmp_path / "code.py"
    cand.write_text(case1.snapshot().source.replace("def add_customer(", "def add_client("))
    code = main(["gate", str(case1.code_path), str(cand), "--tests", str(case1.path / "tests"),
                 "--test-command", "{python} -S -m unittest discover -s tests -q", "--json", str(tmp_path / "r.json")])
    assert code == EXIT_RETRY
    report = json.loads((tmp_path / "r.json").read_text())["report"]
    assert report["correctness"] == "fail_retry"


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["gate"],
        ["gate", "/nonexistent/a.py", "/nonexistent/b.py"],
        ["run-suite", "/nonexistent", "--out", "/tmp/x"],
        ["mine", "/nonexistent"],
        ["frobnicate"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE


def test_gate_requires_test_command_with_tests(files, tmp_path):
    assert main(["gate", files("a.py", PREV), files("b.py", PREV), "--tests", str(tmp_path)]) == EXIT_USAGE


def test_gate_language_mismatch(files):
    assert main(["gate", files("a.py", PREV), files("b.java", "class A {}\n")]) == EXIT_USAGE


def test_mine_prints_table(case1, capsys):
    assert main(["mine", str(case1.path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.splitlines()[0].split() == ["id", "priority", "lock", "type", "source", "anchor"]
    assert "validate_user_input" in out


def test_validate_corpus(tmp_path, case1, capsys):
    assert main(["validate-corpus", "bundled:standard"]) == EXIT_OK
    shutil.copytree(case1.path, tmp_path / "ok")
    (tmp_path / "broken").mkdir()
    (tmp_path / "broken" / "code.py").write_text("x = 1\n")
    assert main(["validate-corpus", str(tmp_path)]) == EXIT_PARTIAL
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["validate-corpus", str(empty)]) == EXIT_USAGE


def test_run_chain_report_and_compare(case1, tmp_path, capsys):
    full, base = tmp_path / "full", tmp_path / "base"
    assert main(["run-chain", str(case1.path), "--mode", "full", "--out", str(full)]) == EXIT_OK
    assert main(["run-chain", str(case1.path), "--mode", "no_assimilation", "--out", str(base)]) == EXIT_OK
    assert (full / "records.jsonl").is_file() and (full / "summary.data").is_file()
    assert main(["report", str(full), "--paired", str(base), "--out", str(tmp_path / "rep")]) == EXIT_OK
    data = json.loads((tmp_path / "rep" / "summary.data").read_text())
    assert data["summary"]["cer"] is not None
    assert main(["compare", str(full), str(base), "--out", str(tmp_path / "cmp")]) == EXIT_OK
    rows = json.loads((tmp_path / "cmp" / "comparison.data").read_text())["rows"]
    assert [r["label"] for r in rows] == ["no_assimilation", "full"]


def test_compare_rejects_duplicate_modes(case1, tmp_path):
    out = tmp_path / "a"
    assert main(["run-chain", str(case1.path), "--mode", "baseline", "--out", str(out)]) == EXIT_OK
    assert main(["compare", str(out), str(out), "--out", str(tmp_path / "cmp")]) == EXIT_USAGE


def test_report_on_malformed_records(tmp_path):
    (tmp_path / "records.jsonl").write_text("{not json\n")
    assert main(["report", str(tmp_path)]) == EXIT_USAGE


def test_console_script_module_entry():
    out = subprocess.run([sys.executable, "-m", "anchorgate.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "run-suite" in out.stdout
