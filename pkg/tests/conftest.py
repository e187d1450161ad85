import math

import pytest

from qmedia.grid import Grid
from qmedia.media import MediumPreset, build_medium


@pytest.fixture
def grid1d():
    return Grid((512,), (20 * math.pi,))


def medium(name, **params):
    return build_medium(MediumPreset(name, params))


@pytest.fixture
def gravity():
    return medium("self_gravity", omega_j=1.0)


@pytest.fixture
def bec():
    return medium("bec_contact", g=1.0)


# acceptance reporting --------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    number, title = mark.args
    _, ok = _CRITERIA.get(number, (title, True))
    _CRITERIA[number] = (title, ok and rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}")
