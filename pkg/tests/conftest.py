import pytest

RESULTS: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion."""
    def record(number: int, detail: str):
        RESULTS[number] = ("PASS", detail)
    yield record
    rep = getattr(request.node, "rep_call", None)
    number = request.node.get_closest_marker("criterion").args[0]
    if rep is None or rep.failed:
        RESULTS[number] = ("FAIL", RESULTS.get(number, ("", "see traceback"))[1])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        status, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {status} - {detail}")
