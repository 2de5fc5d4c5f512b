import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE = []


@pytest.fixture
def acceptance(request, capsys):
    """Record one criterion line; it is printed immediately and again in the terminal summary."""

    def record(number: int, title: str, ok: bool, detail: str, seconds: float, budget: float):
        timed_ok = ok and seconds <= budget
        line = (f"[criterion {number:2d}] {'PASS' if timed_ok else 'FAIL'}  {title}: {detail}"
                f" ({seconds:.1f} s of {budget:g} s)")
        _ACCEPTANCE.append((number, line))
        with capsys.disabled():
            print("\n" + line)
        return timed_ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
