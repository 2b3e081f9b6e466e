import math
import sys
from pathlib import Path

import pytest
from hypothesis import settings, strategies as st

from dirdet.geometry import TWO_PI, DirectedBox

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")

angles = st.floats(0.0, TWO_PI, exclude_max=True)
coords = st.floats(-300.0, 300.0)
sides = st.floats(1.0, 120.0)


@st.composite
def boxes(draw, directed=True):
    theta = draw(angles) if directed else None
    return DirectedBox(draw(coords), draw(coords), draw(sides), draw(sides), theta)


@st.composite
def near_pairs(draw):
    """Two boxes whose centers are close enough to overlap often."""
    a = draw(boxes())
    dx = draw(st.floats(-60.0, 60.0))
    dy = draw(st.floats(-60.0, 60.0))
    b = DirectedBox(a.cx + dx, a.cy + dy, draw(sides), draw(sides), draw(angles))
    return a, b


@pytest.fixture
def bee():
    return lambda cx=0.0, cy=0.0, theta=0.0: DirectedBox(cx, cy, 40.0, 70.0, theta)


@pytest.fixture
def unit_square():
    return [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


_criteria: dict = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    number, text = marker.args
    _criteria[number] = (text, "PASS" if call.excinfo is None else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        text, outcome = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2}: {outcome}  {text}")
