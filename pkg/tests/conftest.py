import numpy as np
import pytest

from pwgreeks import build_grid, flat_model, uniform_correlation


@pytest.fixture
def bs_grid():
    return build_grid([1.0], step=7 / 360, insert_first=1 / 360)


@pytest.fixture
def bs_spec(bs_grid):
    return flat_model([1.0], [0.2], [[1.0]], bs_grid)


@pytest.fixture
def quarterly_grid():
    return build_grid([0.25, 0.5, 0.75, 1.0], step=7 / 360, insert_first=1 / 360)


@pytest.fixture
def two_asset_spec(quarterly_grid):
    return flat_model([1.0, 1.0], [0.2, 0.2], uniform_correlation(2, 0.5), quarterly_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_CRITERIA = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_criterion_" in report.nodeid:
        detail = dict(report.user_properties).get("detail", "")
        name = report.nodeid.split("::")[-1]
        _CRITERIA.append((name, report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, detail in sorted(_CRITERIA, key=lambda c: int(c[0].split("_")[2])):
        number = name.split("_")[2]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {detail}")
