from __future__ import annotations

import re

_CRITERIA: dict[int, tuple[str, bool]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m or (report.when != "call" and report.passed):
        return
    n = int(m.group(1))
    ok = report.passed and _CRITERIA.get(n, ("", True))[1]
    _CRITERIA[n] = (m.group(2).replace("_", " "), ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        desc, ok = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {desc}")
