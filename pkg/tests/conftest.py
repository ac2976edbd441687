import os

import pytest
from hypothesis import HealthCheck, settings

from mlobstruction.ring import QQ, VariableRing, parse
from mlobstruction.systems import VarietySpec

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SOMBRILLA = "(x1-1)^2 - (x2-1)^2*(x3-1)"
HANKEL_X1 = "x1*(x3-x4^2) - x2*(x2-x3*x4) + x3*(x2*x4-x3^2)"
HANKEL_X2 = "x1*(x4-x5^2) - x2*(x2-x3*x5) + x3*(x2*x5-x3*x4)"


@pytest.fixture
def sombrilla():
    return VarietySpec.from_strings(["x1", "x2", "x3"], [SOMBRILLA], 2)


@pytest.fixture
def xy():
    ring = VariableRing(("x", "y"), QQ)
    return ring, lambda s: parse(s, ring)


@pytest.fixture
def report(request):
    """Record one acceptance line; all lines are repeated in the terminal summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def emit(criterion: str, ok: bool | None, detail: str):
        verdict = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"[{verdict}] criterion {criterion}: {detail}"
        print(line)
        lines.append(line)

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split("criterion ")[1]):
            terminalreporter.write_line(line)
