"""Shared test plumbing: acceptance-verdict collection and summary printing.

Acceptance tests record one verdict per criterion through the ``verdict``
fixture; the terminal-summary hook prints them as a single pass/fail line
each at the end of the run, so the gate's outcome is visible even when
pytest captures stdout.
"""

from __future__ import annotations

import pytest

_VERDICTS: list[tuple[int, str, bool, str]] = []


@pytest.fixture(scope="session")
def verdict():
    """Callable recording (criterion number, title, passed, detail)."""

    def _record(num: int, title: str, ok: bool, detail: str = "") -> bool:
        _VERDICTS.append((int(num), title, bool(ok), detail))
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(_VERDICTS):
        line = f"criterion {num}: {'PASS' if ok else 'FAIL'} - {title}"
        if detail:
            line += f" [{detail}]"
        terminalreporter.write_line(line)
