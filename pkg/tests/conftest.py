import pytest

# criterion number -> short description, filled from the markers on collected tests
_TITLES: dict[int, str] = {}
_OUTCOMES: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            n, title = m.args
            _TITLES.setdefault(n, title)
            item.user_properties.append(("criterion", n))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _OUTCOMES.setdefault(crit, []).append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _TITLES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_TITLES):
        results = _OUTCOMES.get(n)
        if not results:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        tr.write_line(f"criterion {n}: {status:<7} {_TITLES[n]}")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)
