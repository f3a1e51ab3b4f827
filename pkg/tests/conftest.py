"""Collects the one-line verdicts of the acceptance suite and prints them
at the end of the run."""

VERDICTS: list[tuple[str, bool, str]] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    VERDICTS.append((criterion, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(VERDICTS, key=lambda v: int(v[0].split()[1])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}")
