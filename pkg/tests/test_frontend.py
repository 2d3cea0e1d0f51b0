import os
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorgate.errors import ParseError, UnsupportedLanguage
from anchorgate.frontend import count_loc, diff_stats, diff_text, lcs, parse_functions, public_interfaces
from anchorgate.frontend._lcs_py import lcs_length as lcs_py
from anchorgate.frontend.base import Visibility
from anchorgate.model import CodeSnapshot, DiffStats, Language
from anchorgate.orchestrator import bundled_corpus, load_sample

from conftest import java, py


def test_validator_is_parsed_with_branch():
    (f,) = parse_functions(py("""
        def validate_user_input(data):
            if not data:
                raise ValueError("empty")
            return data
    """))
    assert f.name == "validate_user_input"
    assert f.contains_branch_or_raise
    assert f.visibility is Visibility.PUBLIC


def test_straight_line_function_has_no_branch():
    (f,) = parse_functions(py("def f(a):\n    return a + 1\n"))
    assert not f.contains_branch_or_raise


def test_empty_file_has_no_functions():
    assert parse_functions(py("")) == []


def test_methods_get_qualified_names_and_drop_self():
    fs = parse_functions(py("""
        class Store:
            def get(self, key, default=None):
                return key
            def _hidden(self):
                pass
    """))
    get = next(f for f in fs if f.name == "get")
    assert get.qualname == "Store.get"
    assert get.parameter_names == ("key", "default")
    assert get.required_parameters == ("key",)
    assert next(f for f in fs if f.name == "_hidden").visibility is Visibility.NON_PUBLIC


def test_java_private_guard_is_non_public():
    fs = parse_functions(java("""
        class H {
            private boolean isSafePath(String p) {
                if (p.contains("..")) { return false; }
                return true;
            }
            public void handler(String path) { }
        }
    """))
    by_name = {f.name: f for f in fs}
    assert by_name["isSafePath"].visibility is Visibility.NON_PUBLIC
    assert by_name["isSafePath"].contains_branch_or_raise
    assert by_name["handler"].visibility is Visibility.PUBLIC


def test_bundled_java_fixture_parses(java_sample):
    names = {f.name for f in parse_functions(java_sample.snapshot())}
    assert {"isSafePath", "handler", "audit"} <= names


def test_syntax_error_raises_parse_error():
    with pytest.raises(ParseError):
        parse_functions(py("def broken(:\n"))


def test_unsupported_extension():
    with pytest.raises(UnsupportedLanguage):
        Language.from_path("code.rb")


@pytest.mark.parametrize(
    "source, expected",
    [
        ("a = 1\nb = 2\n\n\n# note\nc = 3\n", 3),
        ("", 0),
        ('"""module\ndocstring"""\nx = 1\n', 3),  # docstrings are code, not comments
    ],
)
def test_python_loc(source, expected):
    assert count_loc(CodeSnapshot(source)) == expected


def test_java_loc_skips_comments():
    src = "// c\nclass A {\n  /* block\n  still */\n  int x = 1; // trailing\n}\n"
    assert count_loc(CodeSnapshot(src, Language.JAVA)) == 3


def test_bundled_database_fixture_has_61_loc():
    sample = load_sample(bundled_corpus("standard") / "db-users")
    assert count_loc(sample.snapshot()) == 61


@pytest.mark.parametrize(
    "prev, curr, expected",
    [
        ("a\nb\nc\n", "a\nb\nc\n", DiffStats(0, 0)),
        ("a\nb\nc\n", "a\nb\nx\nc\n", DiffStats(1, 0)),
        ("a\nb\nc\nd\n", "a\nx\ny\nz\nd\n", DiffStats(3, 2)),
    ],
)
def test_diff_stats(prev, curr, expected):
    assert diff_stats(CodeSnapshot(prev), CodeSnapshot(curr)) == expected


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 4), max_size=25), st.lists(st.integers(0, 4), max_size=25))
def test_lcs_kernels_agree(a, b):
    expected = lcs_py(a, b)
    assert lcs.lcs_length(a, b) == expected
    if lcs.lcs_length_ext is not None:
        assert lcs.lcs_length_ext(a, b) == expected


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["x", "y", "z", "w"]), max_size=20), st.lists(st.sampled_from(["x", "y", "q"]), max_size=20))
def test_diff_counts_are_consistent(a, b):
    d = diff_text("\n".join(a), "\n".join(b))
    common = len(a) - d.lines_deleted
    assert common == len(b) - d.lines_added
    assert 0 <= common <= min(len(a), len(b))


def test_pure_kernel_forced_by_environment():
    code = "from anchorgate.frontend import lcs; print(lcs.BACKEND)"
    env = dict(os.environ, ANCHORGATE_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_public_interfaces():
    snap = py("def f(a, b):\n    pass\n\ndef _g(x):\n    pass\n")
    assert public_interfaces(snap) == {("f", 2)}
    assert public_interfaces(py("")) == frozenset()


def test_new_public_function_adds_one_interface():
    base = py("def report(data):\n    return data\n")
    final = py("def report(data):\n    return data\n\ndef export_report(fmt):\n    return fmt\n")
    assert len(public_interfaces(final) - public_interfaces(base)) == 1
