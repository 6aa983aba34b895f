"""Collects acceptance verdicts and prints one line per criterion at the end."""
import pytest

VERDICTS = {}  # criterion id -> (passed, detail)
PROPERTY_OUTCOMES = []


def record(criterion: str, passed: bool, detail: str) -> None:
    VERDICTS[criterion] = (bool(passed), detail)


@pytest.fixture
def verdict():
    return record


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if "property" in report.keywords:
            PROPERTY_OUTCOMES.append((report.nodeid, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if PROPERTY_OUTCOMES:
        failed = [n for n, o in PROPERTY_OUTCOMES if o != "passed"]
        record("6", not failed, f"{len(PROPERTY_OUTCOMES) - len(failed)}/{len(PROPERTY_OUTCOMES)} property tests passed"
               + (f"; failing: {', '.join(failed)}" if failed else ""))
    if not VERDICTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(VERDICTS, key=lambda k: (int(k.split(".")[0].rstrip("abcdefgh")), k)):
        ok, detail = VERDICTS[key]
        tr.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
