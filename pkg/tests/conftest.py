"""Shared pytest wiring.

The acceptance tests register their verdict lines here; printing them
from the terminal-summary hook keeps the scorecard visible even though
pytest captures stdout of passing tests.
"""

scorecard = []


def pytest_terminal_summary(terminalreporter):
    if scorecard:
        terminalreporter.section("acceptance scorecard")
        for line in scorecard:
            terminalreporter.write_line(line)
