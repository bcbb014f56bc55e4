"""Collects the outcome of every test marked ``criterion(k)`` and prints one
PASS/FAIL line per acceptance criterion at the end of the session."""

import pytest

_OUTCOMES = {}
_TITLES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k, title): acceptance criterion k")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            k = mark.args[0]
            _TITLES[k] = mark.args[1]
            _OUTCOMES.setdefault(k, [])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _OUTCOMES[mark.args[0]].append((item.name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_OUTCOMES):
        results = _OUTCOMES[k]
        if not results:
            status = "NOT RUN"
        else:
            status = "PASS" if all(ok for _, ok in results) else "FAIL"
        failed = [name for name, ok in results if not ok]
        extra = f" (failed: {', '.join(failed)})" if failed else ""
        tr.write_line(f"criterion {k}: {status} - {_TITLES[k]}{extra}")
