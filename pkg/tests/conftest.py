import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# (criterion number, passed, detail) lines filled in by the acceptance suite
ACCEPTANCE_RESULTS: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
