"""
Shared fixtures and hypothesis strategies.

Loggers run in the test environment (WARNING and above, console only).
"""

import math

import numpy as np
import pytest
from hypothesis import strategies as st

from src.core.logger import LoggerFactory
from src.objects.boxes import AABox, RotatedBox

LoggerFactory.configure_for_testing()


# =============================================================================
# STRATEGIES
# =============================================================================

coordinates = st.floats(min_value=-100.0, max_value=100.0, allow_nan=False, allow_infinity=False)
extents = st.floats(min_value=0.5, max_value=50.0, allow_nan=False, allow_infinity=False)
angles = st.floats(min_value=-math.pi / 2, max_value=math.pi / 2, exclude_max=True,
                   allow_nan=False, allow_infinity=False)


@st.composite
def rotated_boxes(draw, coord=coordinates, extent=extents, angle=angles):
    return RotatedBox(draw(coord), draw(coord), draw(extent), draw(extent), draw(angle))


@st.composite
def aaboxes(draw, coord=coordinates, extent=extents):
    x, y = draw(coord), draw(coord)
    return AABox(x, y, x + draw(extent), y + draw(extent))


@st.composite
def overlapping_pairs(draw):
    """Two rotated boxes whose centres are close enough to overlap often."""
    a = draw(rotated_boxes(coord=st.floats(-5.0, 5.0), extent=st.floats(1.0, 10.0)))
    b = draw(rotated_boxes(coord=st.floats(-5.0, 5.0), extent=st.floats(1.0, 10.0)))
    return a, b


# =============================================================================
# FIXTURES
# =============================================================================

@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_rotated(rng):
    """Factory for arrays of random rotated boxes, (n, 5)."""
    def make(n: int, spread: float = 20.0, low: float = 1.0, high: float = 12.0) -> np.ndarray:
        centres = rng.uniform(-spread, spread, size=(n, 2))
        sizes = rng.uniform(low, high, size=(n, 2))
        thetas = rng.uniform(-math.pi / 2, math.pi / 2, size=(n, 1))
        return np.hstack([centres, sizes, thetas])
    return make
