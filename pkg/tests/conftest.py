import os

import pytest

_VERDICTS: list[tuple[str, bool, str]] = []


def acceptance_profile() -> str:
    return os.environ.get("DCOVMAT_ACCEPTANCE_PROFILE", "full").lower()


@pytest.fixture
def verdict():
    """Record a criterion outcome for the terminal summary, then assert it."""

    def record(label: str, ok: bool, detail: str) -> None:
        _VERDICTS.append((label, bool(ok), detail))
        assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _VERDICTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
