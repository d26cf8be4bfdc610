import pytest

_REPORT = []


@pytest.fixture(scope="session")
def report():
    """Collect one PASS/FAIL line per acceptance criterion."""

    def add(number, name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {name}: {detail}"
        _REPORT.append(line)
        print(line)
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_REPORT, key=lambda s: int(s.split()[2])):
        terminalreporter.write_line(line)
