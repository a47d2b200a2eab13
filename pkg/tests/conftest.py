import pytest

_criteria = {}  # nodeid -> (number, title)
_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number n")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _criteria[item.nodeid] = tuple(m.args)


def pytest_runtest_logreport(report):
    if report.nodeid not in _criteria:
        return
    # a setup error is a failure; otherwise only the call phase counts
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        n, title = _criteria[report.nodeid]
        details = "; ".join(f"{k}={v}" for k, v in report.user_properties)
        _results[n] = (title, report.outcome, details, report.duration)


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_results):
        title, outcome, details, duration = _results[n]
        status = "PASS" if outcome == "passed" else "FAIL"
        tr.write_line(f"criterion {n} {status}: {title} [{duration:.1f}s] {details}".rstrip())
