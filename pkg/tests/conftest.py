import re

import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion; the test asserts separately."""
    number = int(re.search(r"test_c(\d+)_", request.node.name).group(1))

    def record(title, ok, detail=""):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}" + (f" [{detail}]" if detail else "")
        ACCEPTANCE[number] = line
        print(line)
        return ok

    yield record
    if number not in ACCEPTANCE:
        ACCEPTANCE[number] = f"criterion {number:2d} FAIL: raised before completion"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
