from __future__ import annotations

import textwrap
from pathlib import Path

import pytest

from anchorgate.gate import TestRunner
from anchorgate.model import CodeSnapshot, Language
from anchorgate.orchestrator import bundled_corpus, load_sample

FIXTURES = Path(__file__).parent / "fixtures"


def py(source: str) -> CodeSnapshot:
    return CodeSnapshot(textwrap.dedent(source), Language.PYTHON)


def java(source: str) -> CodeSnapshot:
    return CodeSnapshot(textwrap.dedent(source), Language.JAVA)


@pytest.fixture(scope="session")
def standard_corpus() -> Path:
    return bundled_corpus("standard")


@pytest.fixture(scope="session")
def adversarial_corpus() -> Path:
    return bundled_corpus("adversarial")


@pytest.fixture(scope="session")
def case1(adversarial_corpus):
    return load_sample(adversarial_corpus / "case1-validation-deletion")


@pytest.fixture(scope="session")
def case2(adversarial_corpus):
    return load_sample(adversarial_corpus / "case2-exception-weakening")


@pytest.fixture(scope="session")
def case3(adversarial_corpus):
    return load_sample(adversarial_corpus / "case3-permission-bypass")


@pytest.fixture(scope="session")
def java_sample():
    return load_sample(bundled_corpus("java") / "file-handler")


@pytest.fixture(scope="session")
def runner() -> TestRunner:
    """One memoizing test runner for the whole session."""
    return TestRunner()


# criterion lines recorded by the acceptance suite, repeated after the run
ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
