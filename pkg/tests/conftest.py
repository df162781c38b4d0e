"""Shared pytest wiring: surface acceptance-gate verdict lines.

The gate tests record one [PASS]/[FAIL] line per criterion; printing from
inside a test is swallowed by capture, so the lines are replayed in the
terminal summary where they are always visible.
"""

VERDICT_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not VERDICT_LINES:
        return
    terminalreporter.section("acceptance gate")
    for line in VERDICT_LINES:
        terminalreporter.write_line(line)
