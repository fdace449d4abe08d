"""Shared test plumbing: the acceptance suite records one line per criterion."""

RESULTS: list[tuple[int, str, bool, str]] = []


def record(number: int, label: str, passed: bool, detail: str = "") -> None:
    RESULTS.append((number, label, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, label, passed, detail in sorted(RESULTS):
        status = "PASS" if passed else "FAIL"
        line = f"ACCEPTANCE {number} ({label}): {status}"
        if detail:
            line += f" — {detail}"
        terminalreporter.write_line(line)
