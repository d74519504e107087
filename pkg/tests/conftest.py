import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion and assert it."""

    def record(number: int, title: str, checks: list[tuple[str, float, str, float]]) -> None:
        ok = all(_holds(v, op, bound) for _, v, op, bound in checks)
        detail = "; ".join(f"{name} = {v:.4g} {op} {bound:g}" for name, v, op, bound in checks)
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {title} [{detail}]"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert ok, line

    return record


def _holds(value: float, op: str, bound: float) -> bool:
    if value != value:
        return False
    return {"<=": value <= bound, ">=": value >= bound, "==": value == bound}[op]
