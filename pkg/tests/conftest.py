import pytest

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def record():
    def _record(k, passed, detail):
        ACCEPTANCE[k] = (bool(passed), detail)
        return bool(passed)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in range(1, 11):
        if k in ACCEPTANCE:
            ok, detail = ACCEPTANCE[k]
            tr.write_line(f"CRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            tr.write_line(f"CRITERION {k:2d}: NOT RUN")
