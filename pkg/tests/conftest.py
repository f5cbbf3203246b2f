import pytest

# (criterion id, passed, detail) recorded by tests/test_acceptance.py
ACCEPTANCE = []


def record(cid: str, passed: bool, detail: str):
    ACCEPTANCE.append((cid, bool(passed), detail))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{cid:<6} {'PASS' if ok else 'FAIL'}  {detail}")
