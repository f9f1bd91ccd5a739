"""
Detection to ground-truth matching for AP.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.core.constants import EVAL_IOU_THRESHOLD
from src.geometry.batch import iou_rotated_matrix, rotated_boxes_to_array
from src.evaluation.nms import score_order
from src.objects.annotations import AnnotationRecord, GroundTruthSet
from src.objects.boxes import RotatedBox
from src.objects.detections import Detection

GroundTruthInput = Union[Sequence[RotatedBox], AnnotationRecord, GroundTruthSet]


@dataclass(frozen=True)
class MatchResult:
    """
    Per-detection outcome, aligned with the input detection order.

    Attributes:
        tp: True positive flags
        ignored: Detections matched to a difficult box while skipping difficult ones
        matched_gt: Index of the matched box, -1 when unmatched
        n_gt: Ground-truth boxes that count towards recall
    """
    tp: np.ndarray
    ignored: np.ndarray
    matched_gt: np.ndarray
    n_gt: int

    @property
    def fp(self) -> np.ndarray:
        return ~self.tp & ~self.ignored

    @property
    def n_tp(self) -> int:
        return int(self.tp.sum())

    @property
    def n_fp(self) -> int:
        return int(self.fp.sum())

    @property
    def n_fn(self) -> int:
        return self.n_gt - self.n_tp


def ground_truth_boxes(gt: GroundTruthInput) -> Tuple[np.ndarray, np.ndarray]:
    """(M, 5) rotated rows and (M,) difficult mask from any ground-truth container."""
    if isinstance(gt, AnnotationRecord):
        return rotated_boxes_to_array(gt.rotated_boxes()), gt.difficult_mask().reshape(-1)
    if isinstance(gt, GroundTruthSet):
        rotated = gt if gt.is_source else gt.as_axis_rotated()
        return rotated.as_array(), np.zeros(len(gt), dtype=bool)
    boxes = rotated_boxes_to_array(gt)
    return boxes, np.zeros(boxes.shape[0], dtype=bool)


def match_detections(dets: Sequence[Detection],
                     gt: GroundTruthInput,
                     iou_threshold: float = EVAL_IOU_THRESHOLD,
                     skip_difficult: bool = False,
                     difficult: Optional[np.ndarray] = None) -> MatchResult:
    """
    Greedy matching in descending score order.

    A detection is a true positive when its best-IoU unmatched ground-truth
    box reaches the threshold; each box is matched at most once. With
    skip_difficult, a detection whose best box is difficult is ignored and
    difficult boxes do not count towards n_gt.
    """
    gt_boxes, gt_difficult = ground_truth_boxes(gt)
    if difficult is not None:
        gt_difficult = np.asarray(difficult, dtype=bool).reshape(-1)
    if not skip_difficult:
        gt_difficult = np.zeros_like(gt_difficult)

    n = len(dets)
    tp = np.zeros(n, dtype=bool)
    ignored = np.zeros(n, dtype=bool)
    matched_gt = np.full(n, -1, dtype=np.int64)
    n_gt = int((~gt_difficult).sum())
    if n == 0 or gt_boxes.shape[0] == 0:
        return MatchResult(tp, ignored, matched_gt, n_gt)

    det_boxes = rotated_boxes_to_array(d.box for d in dets)
    iou = iou_rotated_matrix(det_boxes, gt_boxes)
    taken = np.zeros(gt_boxes.shape[0], dtype=bool)
    for i in score_order(np.array([d.score for d in dets])):
        candidates = np.where(taken, -1.0, iou[i])
        j = int(np.argmax(candidates))
        if candidates[j] < iou_threshold:
            continue
        if gt_difficult[j]:
            ignored[i] = True
            continue
        tp[i] = True
        matched_gt[i] = j
        taken[j] = True
    return MatchResult(tp, ignored, matched_gt, n_gt)
