"""Shared test plumbing: the acceptance suite registers one result line per
criterion and a terminal hook prints them after the run, outside capture."""

_criteria: dict[int, tuple[str, bool, str]] = {}


def record_criterion(num: int, name: str, ok: bool, detail: str = "") -> None:
    _criteria[num] = (name, bool(ok), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        name, ok, detail = _criteria[num]
        status = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"criterion {num:02d} {name}: {status}{suffix}")
