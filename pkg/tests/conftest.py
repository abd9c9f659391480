"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""
import re

ACCEPTANCE = {}
_ID = re.compile(r"test_criterion_(\d+)_")


def pytest_runtest_logreport(report):
    m = _ID.search(report.nodeid)
    if m is None:
        return
    cid = int(m.group(1))
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or report.outcome != "passed":
        if report.when != "teardown" or cid not in ACCEPTANCE:
            ACCEPTANCE[cid] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        outcome, detail = ACCEPTANCE[cid]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {cid:>2}: {status}  {detail}".rstrip())
