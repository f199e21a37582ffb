"""Collects acceptance outcomes and prints one line per criterion after the run."""

import pytest

_OUTCOMES = {}


class AcceptanceRecorder:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.details = []

    def check(self, ok, detail):
        """Record one sub-check; the criterion passes only if every sub-check does."""
        self.details.append((bool(ok), detail))
        _OUTCOMES[self.number] = (self.title, self.details)
        return bool(ok)


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    return AcceptanceRecorder(number, title)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        title, details = _OUTCOMES[number]
        ok = details and all(d[0] for d in details)
        worst = next((d[1] for d in details if not d[0]), details[-1][1] if details else "no checks")
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {worst}")
