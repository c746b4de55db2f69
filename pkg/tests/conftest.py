import numpy as np
import pytest

from photonic_rd.waveforms import make_time_grid

# (criterion, passed, detail) rows filled by test_acceptance
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def grid():
    return make_time_grid(10e9, 20000)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
