"""
Convex polygon clipping and IoU.

Rotated IoU clips one quad against the other with Sutherland-Hodgman and
measures the result with the shoelace formula. Vertices are classified by
their signed distance to each clip edge; anything within a tolerance scaled
to the coordinates counts as on the edge, so shared and nearly collinear
edges clip cleanly.
"""

import math
from dataclasses import astuple
from typing import List, Sequence, Tuple

from src.core.constants import AREA_EPSILON
from src.core.logger import get_logger
from src.geometry.conversions import rotated_to_quad
from src.objects.boxes import AABox, Point, Quad, RotatedBox

logger = get_logger(__name__, module_name="geometry")

Polygon = List[Point]

# Distances below this fraction of the coordinate scale are treated as zero
EDGE_TOLERANCE = 1e-12


def _edge_distance(p: Point, edge_start: Point, edge_end: Point, length: float) -> float:
    # Positive left of (inside) a counter-clockwise edge
    x1, y1 = edge_start
    x2, y2 = edge_end
    return ((x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1)) / length


def _crossing(s: Point, e: Point, ds: float, de: float) -> Point:
    # Where s -> e meets the edge line, kept on the segment
    t = min(max(ds / (ds - de), 0.0), 1.0)
    return (s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1]))


def _coordinate_scale(*polygons: Sequence[Point]) -> float:
    return max((abs(v) for polygon in polygons for point in polygon for v in point), default=0.0) or 1.0


def clip_convex_polygon(subject: Sequence[Point], clip: Sequence[Point]) -> Polygon:
    """
    Sutherland-Hodgman clipping of ``subject`` by the convex, counter-clockwise ``clip``.

    Returns:
        Vertices of the intersection polygon (possibly empty)
    """
    tolerance = EDGE_TOLERANCE * _coordinate_scale(subject, clip)
    output: Polygon = list(subject)
    cp1 = clip[-1]
    for cp2 in clip:
        if not output:
            break
        length = math.hypot(cp2[0] - cp1[0], cp2[1] - cp1[1])
        if length == 0.0:
            cp1 = cp2
            continue
        input_list = output
        output = []
        distances = [_edge_distance(p, cp1, cp2, length) for p in input_list]
        s, ds = input_list[-1], distances[-1]
        for e, de in zip(input_list, distances):
            e_inside = de >= -tolerance
            s_inside = ds >= -tolerance
            if e_inside:
                if not s_inside:
                    output.append(_crossing(s, e, ds, de))
                output.append(e)
            elif s_inside:
                output.append(_crossing(s, e, ds, de))
            s, ds = e, de
        cp1 = cp2
    return output


def polygon_area(polygon: Sequence[Point]) -> float:
    """Unsigned shoelace area."""
    n = len(polygon)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return abs(acc) / 2.0


def polygon_intersection_area(p: Quad, q: Quad) -> float:
    """
    Area of the intersection of two convex quads.

    Areas below the tangency noise floor are reported as 0.
    """
    clipped = clip_convex_polygon(p.points, q.points)
    area = polygon_area(clipped)
    if area < AREA_EPSILON:
        return 0.0
    return min(area, p.area, q.area)


def iou_aabb(a: AABox, b: AABox) -> float:
    """
    IoU of two axis-aligned boxes; 0 when the union has no area.

    Examples:
        >>> iou_aabb(AABox(0, 0, 2, 2), AABox(1, 0, 3, 2))
        0.3333333333333333
    """
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def _ordered_pair(a: RotatedBox, b: RotatedBox) -> Tuple[RotatedBox, RotatedBox]:
    # A fixed operand order makes iou_rotated(a, b) == iou_rotated(b, a) bit for bit
    return (a, b) if astuple(a) <= astuple(b) else (b, a)


def iou_rotated(a: RotatedBox, b: RotatedBox) -> float:
    """
    Exact IoU of two rotated boxes by convex polygon clipping.

    Symmetric in its arguments and 1.0 for identical boxes.
    """
    if a == b:
        return 1.0
    first, second = _ordered_pair(a, b)
    inter = polygon_intersection_area(rotated_to_quad(first), rotated_to_quad(second))
    union = first.area + second.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)
