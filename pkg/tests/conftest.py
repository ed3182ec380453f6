"""Shared fixtures and the per-criterion acceptance report."""

import numpy as np
import pytest

from gasketlab import GasketSpec, build_graph

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = "PASS" if rep.outcome == "passed" else ("SKIP" if rep.skipped else "FAIL")
        _ACCEPTANCE[num] = (title, status, getattr(item, "acceptance_detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        title, status, detail = _ACCEPTANCE[num]
        line = f"[{status}] {num:2d}. {title}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
    npass = sum(1 for v in _ACCEPTANCE.values() if v[1] == "PASS")
    terminalreporter.write_line(f"{npass}/{len(_ACCEPTANCE)} criteria passed")


@pytest.fixture
def detail(request):
    """Attach a short measured summary to the acceptance line of the running test."""

    def put(text):
        request.node.acceptance_detail = text

    return put


@pytest.fixture(scope="session")
def sg2():
    """SG2 graphs for depths 0..5."""
    spec = GasketSpec.constant(2, 2, 7)
    return {n: build_graph(spec, n) for n in range(6)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
