"""Collects the acceptance criterion verdicts and prints them after the run."""

RESULTS: dict[int, tuple[str, bool, list[str]]] = {}


def record(number: int, title: str, checks: list[tuple[str, bool]]) -> bool:
    ok = all(c for _, c in checks)
    RESULTS[number] = (title, ok, [f"{'ok  ' if c else 'FAIL'} {label}" for label, c in checks])
    print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}")
    for label, c in checks:
        print(f"    {'ok  ' if c else 'FAIL'} {label}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        title, ok, lines = RESULTS[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}")
        for line in lines:
            terminalreporter.write_line(f"    {line}")
