import re

from hypothesis import settings

settings.register_profile("ci", deadline=None)
settings.load_profile("ci")

_CRITERIA = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        key = int(m.group(1))
        detail = ""
        if report.failed:
            detail = str(report.longrepr.reprcrash.message).splitlines()[0] if hasattr(report.longrepr, "reprcrash") \
                else "error"
        _CRITERIA[key] = (m.group(2), "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        name, status, detail = _CRITERIA[key]
        line = f"criterion {key} ({name.replace('_', ' ')}): {status}"
        terminalreporter.write_line(line + (f" -- {detail}" if detail else ""))
