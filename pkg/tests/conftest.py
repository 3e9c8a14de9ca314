import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kondo_phonon.model import example_model, validate  # noqa: E402

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ex1():
    return validate(example_model("example1", 2))


@pytest.fixture(scope="session")
def ex1_phonon():
    return validate(example_model("example1", 2, {"g": 0.5}))


@pytest.fixture(scope="session")
def star():
    return validate(example_model("star", 4))
