import pytest

# Lines recorded by the acceptance tests; flushed into the terminal summary
# so a plain ``pytest`` run ends with one PASS/FAIL line per release
# criterion regardless of capture mode.
_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line for the end-of-run acceptance report."""

    def _report(name: str, ok: bool, detail: str) -> None:
        tag = "PASS" if ok else "FAIL"
        _ACCEPTANCE_LINES.append(f"[{tag}] {name}: {detail}")

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance report")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
