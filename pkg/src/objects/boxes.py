"""
Box value objects.

All boxes are immutable and validate themselves on construction. Coordinates
are real-valued image units with the origin at the top-left corner and y
increasing downward; winding and angles are defined directly in those raw
coordinates (no y-flip).

Angle convention for RotatedBox: theta is measured from the positive x-axis
to the box's w-edge, in the direction that takes +x to +y, and is stored in
the canonical range [-pi/2, pi/2).
"""

import math
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from src.core.constants import AREA_EPSILON, HALF_PI
from src.core.exceptions import DegenerateQuad, InvalidBox, NonConvexQuad

Point = Tuple[float, float]


def canonicalize_angle(theta: float) -> float:
    """
    Wrap an angle to [-pi/2, pi/2).

    Examples:
        >>> canonicalize_angle(math.pi / 2) == -math.pi / 2
        True
    """
    # in-range values are kept bit for bit so serialised angles round-trip
    if -HALF_PI <= theta < HALF_PI:
        return theta
    wrapped = (theta + HALF_PI) % math.pi - HALF_PI
    # float modulo can land exactly on the open end
    if wrapped >= HALF_PI:
        wrapped -= math.pi
    return wrapped


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise InvalidBox(f"{name} must be finite, got {value!r}")


# =============================================================================
# ROTATED BOX
# =============================================================================

@dataclass(frozen=True)
class RotatedBox:
    """
    Five-parameter oriented rectangle (cx, cy, w, h, theta).

    theta is canonicalised on construction, so RotatedBox(..., t) and
    RotatedBox(..., t + pi) hold the same stored angle (up to rounding of
    the addition itself).

    Examples:
        >>> RotatedBox(0, 0, 2, 1, 3.0).theta  # 3.0 - pi
        -0.14159265358979312
    """
    cx: float
    cy: float
    w: float
    h: float
    theta: float = 0.0

    def __post_init__(self):
        _require_finite(cx=self.cx, cy=self.cy, w=self.w, h=self.h, theta=self.theta)
        if self.w <= 0 or self.h <= 0:
            raise InvalidBox(f"RotatedBox extents must be positive, got w={self.w}, h={self.h}")
        object.__setattr__(self, "cx", float(self.cx))
        object.__setattr__(self, "cy", float(self.cy))
        object.__setattr__(self, "w", float(self.w))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "theta", canonicalize_angle(float(self.theta)))

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def aspect_ratio(self) -> float:
        return max(self.w, self.h) / min(self.w, self.h)

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h, self.theta)

    def canonical_long_side(self) -> "RotatedBox":
        """Relabel so that w >= h; the rectangle itself is unchanged."""
        if self.w >= self.h:
            return self
        return RotatedBox(self.cx, self.cy, self.h, self.w, self.theta + HALF_PI)

    def same_rectangle(self, other: "RotatedBox", tol: float = 1e-6) -> bool:
        """
        True when both boxes cover the same rectangle within ``tol``.

        Handles the (w, h, theta) == (h, w, theta + pi/2) relabelling and, for
        squares, the quarter-turn symmetry.
        """
        if abs(self.cx - other.cx) > tol or abs(self.cy - other.cy) > tol:
            return False
        a = self.canonical_long_side()
        b = other.canonical_long_side()
        if abs(a.w - b.w) > tol or abs(a.h - b.h) > tol:
            return False
        period = HALF_PI if abs(a.w - a.h) <= tol else math.pi
        delta = (a.theta - b.theta) % period
        delta = min(delta, period - delta)
        # corner displacement from an angular error scales with the half-diagonal
        return delta * 0.5 * math.hypot(a.w, a.h) <= tol

    def translated(self, dx: float, dy: float) -> "RotatedBox":
        return RotatedBox(self.cx + dx, self.cy + dy, self.w, self.h, self.theta)


# =============================================================================
# AXIS-ALIGNED BOX
# =============================================================================

@dataclass(frozen=True)
class AABox:
    """
    Axis-aligned rectangle (xmin, ymin, xmax, ymax).

    Zero-width or zero-height boxes are valid; their IoU with anything is 0.
    """
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        _require_finite(xmin=self.xmin, ymin=self.ymin, xmax=self.xmax, ymax=self.ymax)
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise InvalidBox(
                f"AABox requires xmin <= xmax and ymin <= ymax, got "
                f"({self.xmin}, {self.ymin}, {self.xmax}, {self.ymax})"
            )
        for name in ("xmin", "ymin", "xmax", "ymax"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "AABox":
        return cls(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def cx(self) -> float:
        return (self.xmin + self.xmax) / 2.0

    @property
    def cy(self) -> float:
        return (self.ymin + self.ymax) / 2.0

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)

    def as_center_form(self) -> Tuple[float, float, float, float]:
        return (self.cx, self.cy, self.width, self.height)

    def as_rotated(self) -> RotatedBox:
        """The same rectangle as a theta = 0 rotated box."""
        return RotatedBox(self.cx, self.cy, self.width, self.height, 0.0)


# =============================================================================
# MIDPOINT-OFFSET PROPOSAL
# =============================================================================

@dataclass(frozen=True)
class MidpointOffsetProposal:
    """
    First-stage proposal: external rectangle (cx, cy, w, h), vertex offsets
    (alpha, beta) from the top and right side midpoints, and objectness p.

    The encoded parallelogram has vertices
    (cx + alpha, cy - h/2), (cx + w/2, cy + beta), (cx - alpha, cy + h/2),
    (cx - w/2, cy - beta). An axis-aligned rectangle is (alpha, beta) = (w/2, h/2).
    """
    cx: float
    cy: float
    w: float
    h: float
    alpha: float
    beta: float
    p: float = 1.0

    def __post_init__(self):
        _require_finite(cx=self.cx, cy=self.cy, w=self.w, h=self.h,
                        alpha=self.alpha, beta=self.beta, p=self.p)
        if self.w <= 0 or self.h <= 0:
            raise InvalidBox(f"Proposal extents must be positive, got w={self.w}, h={self.h}")
        slack = 1e-9 * max(self.w, self.h, 1.0)
        if abs(self.alpha) > self.w / 2.0 + slack or abs(self.beta) > self.h / 2.0 + slack:
            raise InvalidBox(
                f"Offsets must satisfy |alpha| <= w/2 and |beta| <= h/2, got "
                f"alpha={self.alpha}, beta={self.beta} for w={self.w}, h={self.h}"
            )
        if not 0.0 <= self.p <= 1.0:
            raise InvalidBox(f"Objectness must lie in [0, 1], got {self.p}")

    @property
    def external(self) -> AABox:
        return AABox.from_center(self.cx, self.cy, self.w, self.h)

    def vertices(self) -> np.ndarray:
        return np.array([
            [self.cx + self.alpha, self.cy - self.h / 2.0],
            [self.cx + self.w / 2.0, self.cy + self.beta],
            [self.cx - self.alpha, self.cy + self.h / 2.0],
            [self.cx - self.w / 2.0, self.cy - self.beta],
        ])


# =============================================================================
# QUAD
# =============================================================================

def signed_area(points: np.ndarray) -> float:
    """Shoelace signed area; positive for counter-clockwise order."""
    x = points[:, 0]
    y = points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class Quad:
    """
    Convex quadrilateral stored counter-clockwise (positive shoelace area).

    Clockwise input is reversed on construction. Collinear or coincident
    vertices raise DegenerateQuad; a reflex or self-intersecting vertex
    order raises NonConvexQuad.
    """
    points: Tuple[Point, Point, Point, Point]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (4, 2):
            raise DegenerateQuad(f"Quad needs exactly four (x, y) vertices, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidBox("Quad vertices must be finite")

        area = signed_area(pts)
        scale = max(float(np.ptp(pts[:, 0])), float(np.ptp(pts[:, 1])), 1.0)
        if abs(area) < AREA_EPSILON * scale * scale:
            raise DegenerateQuad(f"Quad vertices are collinear: {pts.tolist()}")
        if area < 0:
            pts = pts[[0, 3, 2, 1]]

        edges = np.roll(pts, -1, axis=0) - pts
        nxt = np.roll(edges, -1, axis=0)
        turns = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if np.any(turns < -1e-9 * scale * scale):
            raise NonConvexQuad(f"Quad is not convex: {pts.tolist()}")

        object.__setattr__(self, "points", tuple((float(x), float(y)) for x, y in pts))

    @classmethod
    def from_array(cls, array: np.ndarray) -> "Quad":
        return cls(tuple(map(tuple, np.asarray(array, dtype=float).reshape(4, 2))))

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float)

    @property
    def area(self) -> float:
        return signed_area(self.as_array())

    def __iter__(self) -> Iterator[Point]:
        return iter(self.points)
