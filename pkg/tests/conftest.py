import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_acceptance = []


def _label(nodeid: str) -> str:
    name = nodeid.split("::")[-1]
    m = re.match(r"test_c(\d+)_(.*)", name)
    if not m:
        return name
    return f"criterion {int(m.group(1))}: {m.group(2).replace('_', ' ')}"


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        detail = "; ".join(f"{k}={v}" for k, v in report.user_properties)
        if report.skipped and isinstance(report.longrepr, tuple):
            detail = report.longrepr[2].removeprefix("Skipped: ")
        _acceptance.append((_label(report.nodeid), status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in _acceptance:
        terminalreporter.write_line(f"{status:4}  {label}" + (f"  ({detail})" if detail else ""))
