import numpy as np
import pytest
from hypothesis import settings

from rungekit.geometry import Annulus, Disc, rasterize

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def unit_disc():
    return rasterize([Disc(0j, 1.0)], 0.05)


@pytest.fixture(scope="session")
def annulus():
    return rasterize([Annulus(0j, 0.5, 1.0)], 0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance bookkeeping: one pass/fail line per criterion in the terminal summary
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n, title = mark.args
    if rep.when == "setup" and rep.passed:
        return
    prev = _CRITERIA.get(n, (title, True))
    _CRITERIA[n] = (title, prev[1] and rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}")
