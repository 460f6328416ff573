import pytest

_LINES: dict[int, str] = {}


class CriterionLog:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title

    def report(self, ok: bool, detail: str) -> bool:
        line = f"criterion {self.number:2d} {'PASS' if ok else 'FAIL'}  {self.title}: {detail}"
        _LINES[self.number] = line
        print(line)
        return ok


@pytest.fixture
def criterion(request):
    """Recorder for one acceptance criterion; a test that dies before reporting is logged as FAIL."""
    marker = request.node.get_closest_marker("criterion")
    log = CriterionLog(*marker.args)
    yield log
    if log.number not in _LINES:
        _LINES[log.number] = f"criterion {log.number:2d} FAIL  {log.title}: raised before reporting"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_LINES):
        terminalreporter.write_line(_LINES[n])
