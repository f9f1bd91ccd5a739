"""
Conversions between box representations.

rotated <-> quad, rotated <-> midpoint-offset, rotated -> external rectangle,
and the enlargement applied to axis-aligned ground truth.
"""

import math
from typing import Sequence, Union

import numpy as np

from src.core.constants import AREA_EPSILON
from src.core.exceptions import DegenerateQuad, InvalidGamma
from src.core.logger import get_logger
from src.objects.boxes import AABox, MidpointOffsetProposal, Quad, RotatedBox

logger = get_logger(__name__, module_name="geometry")

ENLARGEMENT_MODES = ("scale", "literal")

# Unit corners in the order that gives positive shoelace area
_UNIT_CORNERS = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])

# Relative area margin a later calipers candidate must beat to replace an earlier one
_CALIPERS_TIE_MARGIN = 1e-9


def rotated_corners(b: RotatedBox) -> np.ndarray:
    """Corners of ``b`` as a (4, 2) array, counter-clockwise."""
    c, s = math.cos(b.theta), math.sin(b.theta)
    local = _UNIT_CORNERS * np.array([b.w, b.h])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([b.cx, b.cy])


def rotated_to_quad(b: RotatedBox) -> Quad:
    """
    Corners of a rotated box.

    Examples:
        >>> rotated_to_quad(RotatedBox(0, 0, 2, 1, 0)).points
        ((-1.0, -0.5), (1.0, -0.5), (1.0, 0.5), (-1.0, 0.5))
    """
    return Quad.from_array(rotated_corners(b))


def quad_to_rotated(q: Union[Quad, Sequence[Sequence[float]], np.ndarray]) -> RotatedBox:
    """
    Minimum-area rotated rectangle enclosing a convex quadrilateral.

    Every edge of the quad is tried as a rectangle side (rotating calipers on
    a four-vertex hull). On ties the earliest edge wins, so for a quad made
    by rotated_to_quad the w-edge and the angle are recovered.

    Args:
        q: Quad, or four (x, y) vertices in either winding

    Returns:
        Rectangle whose w side runs along the chosen edge

    Raises:
        DegenerateQuad: When the vertices are collinear
    """
    if not isinstance(q, Quad):
        q = Quad.from_array(np.asarray(q, dtype=float))
    pts = q.as_array()

    best = None
    for i in range(4):
        edge = pts[(i + 1) % 4] - pts[i]
        length = math.hypot(edge[0], edge[1])
        if length <= 0.0:
            continue
        u = edge / length
        n = np.array([-u[1], u[0]])
        s = pts @ u
        t = pts @ n
        width = float(s.max() - s.min())
        height = float(t.max() - t.min())
        area = width * height
        if best is None or area < best[0] * (1.0 - _CALIPERS_TIE_MARGIN):
            center = u * (s.max() + s.min()) / 2.0 + n * (t.max() + t.min()) / 2.0
            best = (area, center, width, height, math.atan2(u[1], u[0]))

    if best is None or best[0] < AREA_EPSILON:
        raise DegenerateQuad(f"Quad has no area: {pts.tolist()}")

    _, center, width, height, theta = best
    return RotatedBox(float(center[0]), float(center[1]), width, height, theta)


def project_rotated(b: RotatedBox) -> AABox:
    """
    External rectangle: the tightest axis-aligned box containing ``b``.

    Examples:
        >>> project_rotated(RotatedBox(0, 0, 4, 2, 0)).as_tuple()
        (-2.0, -1.0, 2.0, 1.0)
    """
    c, s = abs(math.cos(b.theta)), abs(math.sin(b.theta))
    ex = (b.w * c + b.h * s) / 2.0
    ey = (b.w * s + b.h * c) / 2.0
    return AABox(b.cx - ex, b.cy - ey, b.cx + ex, b.cy + ey)


def enlarge_aabox(b: AABox, gamma: float, mode: str = "scale") -> AABox:
    """
    Enlarge an axis-aligned ground-truth box by ``gamma``.

    Args:
        b: Box to enlarge
        gamma: Enlargement factor, >= 1
        mode: 'scale' multiplies width and height by gamma about the centre
            (gamma = 1 returns ``b`` unchanged); 'literal' pushes every side
            out by gamma times the box's own width or height

    Raises:
        InvalidGamma: gamma < 1 or not finite
    """
    if not math.isfinite(gamma) or gamma < 1.0:
        raise InvalidGamma(f"gamma must be a finite value >= 1, got {gamma!r}")
    if mode not in ENLARGEMENT_MODES:
        raise InvalidGamma(f"Unknown enlargement mode '{mode}', expected one of {ENLARGEMENT_MODES}")

    if mode == "literal":
        dw, dh = gamma * b.width, gamma * b.height
        return AABox(b.xmin - dw, b.ymin - dh, b.xmax + dw, b.ymax + dh)

    if gamma == 1.0:
        return b
    return AABox.from_center(b.cx, b.cy, b.width * gamma, b.height * gamma)


# =============================================================================
# MIDPOINT-OFFSET REPRESENTATION
# =============================================================================

def rectify_half_diagonals(e1: np.ndarray, e2: np.ndarray) -> RotatedBox:
    """
    Rectangle from the two half-diagonals of a parallelogram centred at the origin.

    The shorter diagonal is stretched to the longer one's length; equal
    diagonals make the parallelogram a rectangle. The returned box is
    centred at the origin and labelled long side first.
    """
    l1 = math.hypot(e1[0], e1[1])
    l2 = math.hypot(e2[0], e2[1])
    scale = max(l1, l2)
    e1 = e1 * (scale / l1)
    e2 = e2 * (scale / l2)

    side_a = e2 - e1
    side_b = e1 + e2
    len_a = math.hypot(side_a[0], side_a[1])
    len_b = math.hypot(side_b[0], side_b[1])
    if len_a >= len_b:
        return RotatedBox(0.0, 0.0, len_a, len_b, math.atan2(side_a[1], side_a[0]))
    return RotatedBox(0.0, 0.0, len_b, len_a, math.atan2(side_b[1], side_b[0]))


def midpoint_offset_to_rotated(r: MidpointOffsetProposal) -> RotatedBox:
    """
    Decode a midpoint-offset proposal into a rotated box (w >= h labelling).

    Raises:
        DegenerateQuad: When the encoded parallelogram has no area
    """
    e1 = np.array([r.alpha, -r.h / 2.0])
    e2 = np.array([r.w / 2.0, r.beta])
    cross = e1[0] * e2[1] - e1[1] * e2[0]
    if cross <= AREA_EPSILON * max(r.w * r.h, 1.0):
        raise DegenerateQuad(
            f"Midpoint offsets collapse the parallelogram: alpha={r.alpha}, beta={r.beta}, w={r.w}, h={r.h}"
        )
    local = rectify_half_diagonals(e1, e2)
    return local.translated(r.cx, r.cy)


def theta_to_midpoint_offset(b: RotatedBox) -> MidpointOffsetProposal:
    """
    Encode a rotated box as external rectangle plus midpoint offsets.

    alpha is the x offset of the corner touching the top side (minimum y,
    ties to larger x); beta is the y offset of the next corner
    counter-clockwise, which touches the right side. p is set to 1.
    """
    corners = rotated_corners(b)
    ext = project_rotated(b)
    top = min(range(4), key=lambda k: (corners[k, 1], -corners[k, 0]))
    right = (top + 1) % 4

    half_w, half_h = ext.width / 2.0, ext.height / 2.0
    alpha = float(np.clip(corners[top, 0] - b.cx, -half_w, half_w))
    beta = float(np.clip(corners[right, 1] - b.cy, -half_h, half_h))
    return MidpointOffsetProposal(b.cx, b.cy, ext.width, ext.height, alpha, beta, 1.0)
