ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    """Echo the per-criterion acceptance lines after capture is released."""
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.line(line)
