import re
import warnings

import numpy as np
import pytest

warnings.filterwarnings("ignore", message=".*TBB.*")

from c2flow.grid import Field2D, GridSpec  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(grid, rng, scale=1.0):
    return Field2D(grid, scale * rng.standard_normal(grid.size))


@pytest.fixture
def grid16():
    return GridSpec(16)


# one summary line per acceptance criterion, aggregated over its tests
_CRITERION = re.compile(r"test_criterion_(\d+)_")
_acceptance: dict[int, dict] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    entry = _acceptance.setdefault(int(m.group(1)), {"ok": True, "notes": [], "skipped": True})
    if report.skipped:
        return
    entry["skipped"] = False
    entry["ok"] &= report.passed
    entry["notes"] += [str(v) for k, v in report.user_properties if k == "measured"]


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance):
        e = _acceptance[num]
        status = "SKIP" if e["skipped"] else ("PASS" if e["ok"] else "FAIL")
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {'; '.join(e['notes'])}")
