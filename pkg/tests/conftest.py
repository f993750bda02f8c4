import pytest

N_CRITERIA = 12


def pytest_configure(config):
    config._criteria = {}


@pytest.fixture
def report(request):
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def _report(number, ok, detail):
        request.config._criteria[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return _report


def pytest_terminal_summary(terminalreporter, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in results:
            ok, detail = results[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: NOT RUN (deselected or errored)")
