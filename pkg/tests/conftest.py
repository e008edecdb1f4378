import pytest

# criterion number -> (passed, detail), filled in by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")


@pytest.fixture
def report(request):
    """``report(n, ok, detail)`` records and prints a criterion line, then asserts."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def _report(n, ok, detail):
        ACCEPTANCE[n] = (bool(ok), detail)
        with capman.global_and_fixture_disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
        assert ok, detail

    return _report
