import pytest

_OUTCOMES = {}
_DETAILS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def measured(request):
    """Collects measured values for the acceptance summary line of the current test."""
    details = {}
    _DETAILS[request.node.nodeid] = details
    return details


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _OUTCOMES[item.nodeid] = (marker.args[0], marker.args[1], report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (number, title, passed) in sorted(_OUTCOMES.items(), key=lambda kv: kv[1][0]):
        details = _DETAILS.get(nodeid, {})
        extra = ", ".join(f"{k}={v}" for k, v in details.items())
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2} {status}  {title}"
                                    + (f"  [{extra}]" if extra else ""))
