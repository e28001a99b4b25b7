import pytest

_RESULTS = []


@pytest.fixture
def verdict():
    """Record a named acceptance outcome; the terminal summary prints one line per criterion."""

    def record(number, name, ok, detail=""):
        _RESULTS.append((number, name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_RESULTS):
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
