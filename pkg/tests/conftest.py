import pytest

_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record the outcome of an acceptance criterion for the end-of-run summary."""
    def record(criterion: str, passed: bool, detail: str) -> None:
        _RESULTS[criterion] = (bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_RESULTS):
        passed, detail = _RESULTS[name]
        terminalreporter.write_line(f"{name}: {'PASS' if passed else 'FAIL'}  {detail}")
