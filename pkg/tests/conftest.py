import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Register a test as acceptance criterion ``n``; outcome is filled in by the report hook."""
    def register(n: int, title: str):
        ACCEPTANCE[request.node.nodeid] = (n, title)
    return register


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.nodeid in ACCEPTANCE and rep.when == "call":
        n, title = ACCEPTANCE[item.nodeid]
        ACCEPTANCE[item.nodeid] = (n, title, rep.passed)


def pytest_terminal_summary(terminalreporter):
    rows = sorted(v for v in ACCEPTANCE.values() if len(v) == 3)
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, passed in rows:
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {title}")
