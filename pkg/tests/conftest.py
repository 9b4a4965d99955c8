"""Shared fixtures and the acceptance-report terminal hook."""

from __future__ import annotations

_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    """Collect one acceptance-criterion result line for the final summary."""
    verdict = "PASS" if passed else "FAIL"
    _ACCEPTANCE_LINES.append(f"criterion {number}: {verdict} - {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
