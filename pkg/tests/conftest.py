import warnings

import numpy as np
import pytest

from spdchom.grid import GridSpec


@pytest.fixture
def small_grid():
    return GridSpec(16, 16, 16, 7.8e-3, 7.8e-3, 2.3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _quiet_window_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="grid window smaller")
        yield


# acceptance report: one line per criterion, printed after the run

ACCEPTANCE = {}


def record(criterion, label, ok, detail):
    ACCEPTANCE.setdefault(criterion, []).append((label, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        items = ACCEPTANCE[crit]
        verdict = "PASS" if all(ok for _, ok, _ in items) else "FAIL"
        parts = "; ".join(f"{label} {'ok' if ok else 'FAILED'} ({detail})" for label, ok, detail in items)
        terminalreporter.write_line(f"criterion {crit}: {verdict} | {parts}")
