import numpy as np
import pytest

from calderon_dini.field import GridSpec

_ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    """Store ``(passed, detail)`` for one acceptance criterion."""

    def record(number, passed, detail=""):
        _ACCEPTANCE[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def grid256():
    return GridSpec(256, 4.0)


@pytest.fixture(scope="session")
def grid512():
    return GridSpec(512, 4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
