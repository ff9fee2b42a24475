import sys
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

small_rationals = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@st.composite
def triples(draw, nonzero=True):
    t = tuple(draw(small_rationals) for _ in range(3))
    if nonzero and not any(t):
        t = (Fraction(1),) + t[1:]
    return t


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict = {}


@pytest.fixture
def record_criterion():
    def record(number: int, title: str, ok: bool, detail: str = ""):
        ACCEPTANCE[number] = (title, ok, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
