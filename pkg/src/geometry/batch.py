"""
Vectorised geometry kernels over numpy arrays.

Rotated boxes are rows (cx, cy, w, h, theta); axis-aligned boxes are rows
(xmin, ymin, xmax, ymax). The rotated IoU matrix collects, per pair, the
corners of each box inside the other and all edge-edge crossings, orders
them by angle about their centroid and applies the shoelace formula. It
agrees with the clipping path in ``clipping.py`` to floating-point noise.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Optional, Tuple

import numpy as np

from src.core.constants import AREA_EPSILON
from src.core.exceptions import ConfigError, InvalidBox, InvalidGamma
from src.core.logger import get_logger
from src.objects.boxes import AABox, RotatedBox

logger = get_logger(__name__, module_name="geometry")

# Pairs evaluated per block; bounds the (pairs, 24, 2) working set
_PAIRS_PER_BLOCK = 65536

_max_workers = 1


def set_max_workers(n: int) -> None:
    """Cap the worker threads used for row blocks of IoU matrices (CLI --threads)."""
    global _max_workers
    if n < 1:
        raise ConfigError(f"Worker count must be >= 1, got {n}")
    _max_workers = int(n)


def get_max_workers() -> int:
    return _max_workers


# =============================================================================
# ARRAY CONVERSION
# =============================================================================

def rotated_boxes_to_array(boxes: Iterable[RotatedBox]) -> np.ndarray:
    rows = [b.as_tuple() for b in boxes]
    return np.asarray(rows, dtype=float).reshape(-1, 5)


def aaboxes_to_array(boxes: Iterable[AABox]) -> np.ndarray:
    rows = [b.as_tuple() for b in boxes]
    return np.asarray(rows, dtype=float).reshape(-1, 4)


def array_to_rotated_boxes(array: np.ndarray) -> list:
    return [RotatedBox(*row) for row in np.asarray(array, dtype=float).reshape(-1, 5)]


def _as_rotated_array(boxes) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        arr = boxes.astype(float, copy=False)
    else:
        arr = rotated_boxes_to_array(boxes)
    return arr.reshape(-1, 5)


def _as_aabox_array(boxes) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        arr = boxes.astype(float, copy=False)
    else:
        arr = aaboxes_to_array(boxes)
    return arr.reshape(-1, 4)


# =============================================================================
# KERNELS
# =============================================================================

def rotated_to_quads(boxes) -> np.ndarray:
    """(N, 5) rotated boxes -> (N, 4, 2) counter-clockwise corners."""
    arr = _as_rotated_array(boxes)
    cx, cy, w, h, t = arr.T
    c, s = np.cos(t), np.sin(t)
    ux, uy = c * w / 2.0, s * w / 2.0
    vx, vy = -s * h / 2.0, c * h / 2.0
    quads = np.empty((arr.shape[0], 4, 2))
    quads[:, 0] = np.stack([cx - ux - vx, cy - uy - vy], axis=1)
    quads[:, 1] = np.stack([cx + ux - vx, cy + uy - vy], axis=1)
    quads[:, 2] = np.stack([cx + ux + vx, cy + uy + vy], axis=1)
    quads[:, 3] = np.stack([cx - ux + vx, cy - uy + vy], axis=1)
    return quads


def project_rotated_array(boxes) -> np.ndarray:
    """(N, 5) rotated boxes -> (N, 4) external rectangles."""
    arr = _as_rotated_array(boxes)
    cx, cy, w, h, t = arr.T
    c, s = np.abs(np.cos(t)), np.abs(np.sin(t))
    ex = (w * c + h * s) / 2.0
    ey = (w * s + h * c) / 2.0
    return np.stack([cx - ex, cy - ey, cx + ex, cy + ey], axis=1)


def enlarge_aabox_array(boxes, gamma: float, mode: str = "scale") -> np.ndarray:
    """Row-wise ``enlarge_aabox`` over (N, 4) axis-aligned boxes."""
    if not np.isfinite(gamma) or gamma < 1.0:
        raise InvalidGamma(f"gamma must be a finite value >= 1, got {gamma!r}")
    arr = _as_aabox_array(boxes)
    if mode == "literal":
        dw = gamma * (arr[:, 2] - arr[:, 0])
        dh = gamma * (arr[:, 3] - arr[:, 1])
        return np.stack([arr[:, 0] - dw, arr[:, 1] - dh, arr[:, 2] + dw, arr[:, 3] + dh], axis=1)
    if mode != "scale":
        raise InvalidGamma(f"Unknown enlargement mode '{mode}'")
    if gamma == 1.0:
        return arr
    cx = (arr[:, 0] + arr[:, 2]) / 2.0
    cy = (arr[:, 1] + arr[:, 3]) / 2.0
    hw = (arr[:, 2] - arr[:, 0]) * gamma / 2.0
    hh = (arr[:, 3] - arr[:, 1]) * gamma / 2.0
    return np.stack([cx - hw, cy - hh, cx + hw, cy + hh], axis=1)


def iou_aabb_matrix(a, b) -> np.ndarray:
    """(N, 4) x (M, 4) axis-aligned boxes -> (N, M) IoU."""
    a = _as_aabox_array(a)
    b = _as_aabox_array(b)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        iou = np.where(union > 0.0, inter / union, 0.0)
    return np.clip(iou, 0.0, 1.0)


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _points_inside(points: np.ndarray, quads: np.ndarray) -> np.ndarray:
    """
    points (P, 4, 2) against quads (P, 4, 2), pairwise -> (P, 4) inside flags.
    """
    start = quads[:, None, :, :]
    edge = np.roll(quads, -1, axis=1)[:, None, :, :] - start
    rel = points[:, :, None, :] - start
    cross = _cross(edge[..., 0], edge[..., 1], rel[..., 0], rel[..., 1])
    scale = np.max(np.abs(quads), axis=(1, 2))[:, None, None] + 1.0
    return np.all(cross >= -1e-12 * scale * scale, axis=2)


def _pair_intersection_area(qa: np.ndarray, qb: np.ndarray) -> np.ndarray:
    """Intersection areas of paired quads qa[k], qb[k] -> (P,)."""
    n = qa.shape[0]
    if n == 0:
        return np.zeros(0)

    a_in_b = _points_inside(qa, qb)
    b_in_a = _points_inside(qb, qa)

    a0 = qa[:, :, None, :]
    da = np.roll(qa, -1, axis=1)[:, :, None, :] - a0
    b0 = qb[:, None, :, :]
    db = np.roll(qb, -1, axis=1)[:, None, :, :] - b0
    denom = _cross(da[..., 0], da[..., 1], db[..., 0], db[..., 1])
    diff = b0 - a0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(diff[..., 0], diff[..., 1], db[..., 0], db[..., 1]) / denom
        u = _cross(diff[..., 0], diff[..., 1], da[..., 0], da[..., 1]) / denom
    hit = (denom != 0.0) & (t >= 0.0) & (t <= 1.0) & (u >= 0.0) & (u <= 1.0)
    crossings = a0 + np.where(hit[..., None], t[..., None], 0.0) * da

    points = np.concatenate([qa, qb, crossings.reshape(n, 16, 2)], axis=1)
    valid = np.concatenate([a_in_b, b_in_a, hit.reshape(n, 16)], axis=1)
    count = valid.sum(axis=1)

    weights = valid.astype(float)
    centroid = (points * weights[..., None]).sum(axis=1) / np.maximum(count, 1)[:, None]
    rel = points - centroid[:, None, :]
    angle = np.where(valid, np.arctan2(rel[..., 1], rel[..., 0]), np.inf)
    order = np.argsort(angle, axis=1, kind="stable")
    ordered = np.take_along_axis(points, order[..., None], axis=1)
    ordered_valid = np.take_along_axis(valid, order, axis=1)
    # Trailing invalid slots repeat the first vertex and add nothing to the area
    ordered = np.where(ordered_valid[..., None], ordered, ordered[:, :1, :])

    x = ordered[..., 0]
    y = ordered[..., 1]
    area = 0.5 * np.abs(np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1))
    area = np.where((count >= 3) & (area >= AREA_EPSILON), area, 0.0)
    area_a = np.abs(_shoelace(qa))
    area_b = np.abs(_shoelace(qb))
    return np.minimum(area, np.minimum(area_a, area_b))


def _shoelace(quads: np.ndarray) -> np.ndarray:
    x = quads[..., 0]
    y = quads[..., 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y, axis=-1)


def _iou_rotated_rows(arr_a: np.ndarray, quads_a: np.ndarray, arr_b: np.ndarray, quads_b: np.ndarray) -> np.ndarray:
    n, m = arr_a.shape[0], arr_b.shape[0]
    qa = np.repeat(quads_a, m, axis=0)
    qb = np.tile(quads_b, (n, 1, 1))
    inter = _pair_intersection_area(qa, qb).reshape(n, m)
    area_a = arr_a[:, 2] * arr_a[:, 3]
    area_b = arr_b[:, 2] * arr_b[:, 3]
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        iou = np.where(union > 0.0, inter / union, 0.0)
    same = np.all(arr_a[:, None, :] == arr_b[None, :, :], axis=2)
    iou = np.where(same, 1.0, iou)
    return np.clip(iou, 0.0, 1.0)


def iou_rotated_matrix(a, b, max_workers: Optional[int] = None) -> np.ndarray:
    """
    (N, 5) x (M, 5) rotated boxes -> (N, M) IoU.

    Rows are processed in blocks; with more than one worker the blocks run
    on a thread pool. Results do not depend on the worker count.

    Args:
        a: Rotated boxes as an array or a sequence of RotatedBox
        b: Rotated boxes as an array or a sequence of RotatedBox
        max_workers: Thread cap (module default if None)
    """
    arr_a = _as_rotated_array(a)
    arr_b = _as_rotated_array(b)
    n, m = arr_a.shape[0], arr_b.shape[0]
    if n == 0 or m == 0:
        return np.zeros((n, m))
    if np.any(arr_a[:, 2:4] <= 0) or np.any(arr_b[:, 2:4] <= 0):
        raise InvalidBox("Rotated boxes must have positive extents")

    quads_a = rotated_to_quads(arr_a)
    quads_b = rotated_to_quads(arr_b)
    rows_per_block = max(1, _PAIRS_PER_BLOCK // m)
    blocks = [slice(i, min(i + rows_per_block, n)) for i in range(0, n, rows_per_block)]
    workers = max_workers or _max_workers

    def run(block: slice) -> np.ndarray:
        return _iou_rotated_rows(arr_a[block], quads_a[block], arr_b, quads_b)

    if workers > 1 and len(blocks) > 1:
        logger.debug("Rotated IoU %dx%d over %d blocks on %d workers", n, m, len(blocks), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(block) for block in blocks]
    return np.vstack(parts)


def midpoint_offsets_to_rotated_array(proposals: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Decode (N, 6) rows (cx, cy, w, h, alpha, beta) into rotated boxes.

    Returns:
        (boxes, valid): (N, 5) long-side-first boxes and a mask that is False
        where the parallelogram collapses (those rows hold NaN)
    """
    arr = np.asarray(proposals, dtype=float).reshape(-1, 6)
    cx, cy, w, h, alpha, beta = arr.T
    e1 = np.stack([alpha, -h / 2.0], axis=1)
    e2 = np.stack([w / 2.0, beta], axis=1)
    cross = _cross(e1[:, 0], e1[:, 1], e2[:, 0], e2[:, 1])
    valid = (w > 0) & (h > 0) & (cross > AREA_EPSILON * np.maximum(w * h, 1.0))

    l1 = np.linalg.norm(e1, axis=1)
    l2 = np.linalg.norm(e2, axis=1)
    scale = np.maximum(l1, l2)
    with np.errstate(divide="ignore", invalid="ignore"):
        e1 = e1 * (scale / l1)[:, None]
        e2 = e2 * (scale / l2)[:, None]
    side_a = e2 - e1
    side_b = e1 + e2
    len_a = np.linalg.norm(side_a, axis=1)
    len_b = np.linalg.norm(side_b, axis=1)
    use_a = len_a >= len_b
    long_side = np.where(use_a[:, None], side_a, side_b)
    width = np.maximum(len_a, len_b)
    height = np.minimum(len_a, len_b)
    theta = np.arctan2(long_side[:, 1], long_side[:, 0])
    theta = (theta + np.pi / 2.0) % np.pi - np.pi / 2.0
    theta = np.where(theta >= np.pi / 2.0, theta - np.pi, theta)

    boxes = np.stack([cx, cy, width, height, theta], axis=1)
    valid &= height > 0
    boxes[~valid] = np.nan
    return boxes, valid


def theta_to_midpoint_offsets_array(boxes) -> np.ndarray:
    """
    Row-wise ``theta_to_midpoint_offset``: (N, 5) rotated boxes -> (N, 6)
    rows (cx, cy, w, h, alpha, beta) of the external rectangle encoding.
    """
    arr = _as_rotated_array(boxes)
    n = arr.shape[0]
    if n == 0:
        return np.zeros((0, 6))
    rel = rotated_to_quads(arr) - arr[:, None, 0:2]
    ext = project_rotated_array(arr)
    width = ext[:, 2] - ext[:, 0]
    height = ext[:, 3] - ext[:, 1]

    # top corner: smallest y, ties to larger x; the next corner touches the right side
    order = np.lexsort((-rel[:, :, 0], rel[:, :, 1]), axis=-1)
    top = order[:, 0]
    right = (top + 1) % 4
    rows = np.arange(n)
    alpha = np.clip(rel[rows, top, 0], -width / 2.0, width / 2.0)
    beta = np.clip(rel[rows, right, 1], -height / 2.0, height / 2.0)
    return np.stack([arr[:, 0], arr[:, 1], width, height, alpha, beta], axis=1)
