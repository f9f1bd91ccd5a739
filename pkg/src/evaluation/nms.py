"""
Greedy rotated non-maximum suppression.
"""

from typing import List, Sequence

import numpy as np

from src.core.constants import NMS_IOU_THRESHOLD
from src.core.exceptions import EvaluationError
from src.core.logger import get_logger
from src.geometry.batch import iou_rotated_matrix, rotated_boxes_to_array
from src.objects.detections import Detection

logger = get_logger(__name__, module_name="evaluation")


def score_order(scores: np.ndarray) -> np.ndarray:
    """Indices by descending score; equal scores keep input order."""
    return np.argsort(-np.asarray(scores, dtype=float), kind="stable")


def rotated_nms(dets: Sequence[Detection], iou_threshold: float = NMS_IOU_THRESHOLD) -> List[Detection]:
    """
    Keep the highest-scoring detection, drop every remaining detection whose
    rotated IoU with it is greater than the threshold, repeat.

    Args:
        dets: Detections of one image
        iou_threshold: Suppression threshold in (0, 1]

    Returns:
        Kept detections sorted by descending score
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise EvaluationError(f"NMS threshold must be in (0, 1], got {iou_threshold}")
    if not dets:
        return []

    order = score_order(np.array([d.score for d in dets]))
    boxes = rotated_boxes_to_array(d.box for d in dets)[order]
    iou = iou_rotated_matrix(boxes, boxes)

    suppressed = np.zeros(len(order), dtype=bool)
    kept = []
    for rank in range(len(order)):
        if suppressed[rank]:
            continue
        kept.append(dets[order[rank]])
        suppressed[rank + 1:] |= iou[rank, rank + 1:] > iou_threshold

    logger.debug("NMS kept %d of %d detections at threshold %.2f", len(kept), len(dets), iou_threshold)
    return kept
