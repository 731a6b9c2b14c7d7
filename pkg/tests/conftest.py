import pytest

CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record ``(k, ok, detail)`` as one acceptance line; returns ``ok``."""

    def record(k: int, ok: bool, detail: str) -> bool:
        CRITERIA[k] = f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {detail}"
        print(CRITERIA[k])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])
