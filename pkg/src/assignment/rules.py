"""
Label assignment for both stages and both datasets.

First stage:   external rectangle of each proposal vs P(gt), where P projects
               rotated source boxes and enlarges axis-aligned target boxes.
Second stage:  rotated IoU against source boxes, or projected IoU against
               enlarged target boxes, or rotated IoU against target boxes read
               as theta = 0 followed by the reliability switch.

All rules take sigma = argmax IoU (lowest index on ties) and tau = max IoU.
"""

from typing import Sequence, Union

import numpy as np

from src.config.config_objects import HeuristicConfig
from src.core.constants import POSITIVE_IOU_THRESHOLD
from src.core.exceptions import GroundTruthKindError, InvalidGamma
from src.core.logger import get_logger
from src.assignment.results import NO_MATCH, AssignmentBatch
from src.geometry.batch import (
    enlarge_aabox_array,
    iou_aabb_matrix,
    iou_rotated_matrix,
    project_rotated_array,
    rotated_boxes_to_array,
)
from src.objects.annotations import GroundTruthKind, GroundTruthSet
from src.objects.boxes import MidpointOffsetProposal, RotatedBox

logger = get_logger(__name__, module_name="assignment")

ProposalInput = Union[Sequence[MidpointOffsetProposal], np.ndarray]
RotatedInput = Union[Sequence[RotatedBox], np.ndarray]


def assign_by_iou(iou: np.ndarray, positive_threshold: float = POSITIVE_IOU_THRESHOLD) -> AssignmentBatch:
    """
    Argmax assignment from an (N, M) IoU matrix.

    np.argmax returns the first maximum, which gives the lowest-index tie-break.
    Proposals with no overlap at all get sigma = NO_MATCH.
    """
    n, m = iou.shape
    if m == 0:
        return AssignmentBatch.empty(n)
    sigma = np.argmax(iou, axis=1)
    tau = iou[np.arange(n), sigma]
    sigma = np.where(tau > 0.0, sigma, NO_MATCH)
    return AssignmentBatch(sigma, tau, tau >= positive_threshold)


def _external_rects(proposals: ProposalInput) -> np.ndarray:
    if isinstance(proposals, np.ndarray):
        if proposals.size == 0:
            return np.zeros((0, 4))
        arr = proposals.astype(float, copy=False).reshape(proposals.shape[0], -1)
        cx, cy, w, h = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
    else:
        rows = np.asarray([(p.cx, p.cy, p.w, p.h) for p in proposals], dtype=float).reshape(-1, 4)
        cx, cy, w, h = rows.T
    return np.stack([cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0], axis=1)


def _rotated_rows(proposals: RotatedInput) -> np.ndarray:
    if isinstance(proposals, np.ndarray):
        return proposals.astype(float, copy=False).reshape(-1, 5)
    return rotated_boxes_to_array(proposals)


def _require_kind(gt: GroundTruthSet, kind: GroundTruthKind, rule: str) -> None:
    if gt.kind is not kind:
        raise GroundTruthKindError(f"{rule} needs {kind.value} ground truth, got {gt.kind.value}")


def transformed_ground_truth(gt: GroundTruthSet, gamma: float = 1.0, enlargement_mode: str = "scale") -> np.ndarray:
    """P(gt) as (M, 4) axis-aligned rows: projection for source, enlargement for target."""
    if not np.isfinite(gamma) or gamma < 1.0:
        raise InvalidGamma(f"gamma must be a finite value >= 1, got {gamma!r}")
    if gt.is_source:
        return project_rotated_array(gt.as_array())
    return enlarge_aabox_array(gt.as_array(), gamma, enlargement_mode)


def assign_first_stage(proposals: ProposalInput,
                       gt: GroundTruthSet,
                       gamma: float = 1.0,
                       positive_threshold: float = POSITIVE_IOU_THRESHOLD,
                       enlargement_mode: str = "scale") -> AssignmentBatch:
    """
    First-stage assignment on external rectangles.

    Args:
        proposals: MidpointOffsetProposal sequence, or (N, >=4) rows starting cx, cy, w, h
        gt: Source or target ground truth
        gamma: Enlargement factor for target boxes (>= 1)
        positive_threshold: IoU needed for a positive
        enlargement_mode: 'scale' or 'literal'

    Raises:
        InvalidGamma: gamma < 1
    """
    gt_rects = transformed_ground_truth(gt, gamma, enlargement_mode)
    rects = _external_rects(proposals)
    if len(gt) == 0:
        logger.debug("First-stage assignment with empty ground truth: %d negatives", rects.shape[0])
        return AssignmentBatch.empty(rects.shape[0])
    return assign_by_iou(iou_aabb_matrix(rects, gt_rects), positive_threshold)


def assign_second_stage_source(proposals: RotatedInput,
                               gt: GroundTruthSet,
                               positive_threshold: float = POSITIVE_IOU_THRESHOLD) -> AssignmentBatch:
    """
    Second-stage assignment by rotated IoU against rotated ground truth.

    The proposals are decoded first-stage outputs, not second-stage refinements.

    Raises:
        GroundTruthKindError: gt is not SOURCE_ROTATED
    """
    _require_kind(gt, GroundTruthKind.SOURCE_ROTATED, "assign_second_stage_source")
    rows = _rotated_rows(proposals)
    if len(gt) == 0:
        return AssignmentBatch.empty(rows.shape[0])
    return assign_by_iou(iou_rotated_matrix(rows, gt.as_array()), positive_threshold)


def assign_second_stage_projection(proposals: RotatedInput,
                                   gt: GroundTruthSet,
                                   gamma: float = 1.0,
                                   positive_threshold: float = POSITIVE_IOU_THRESHOLD,
                                   enlargement_mode: str = "scale") -> AssignmentBatch:
    """
    Second-stage target assignment: IoU of each proposal's external rectangle
    with the enlarged axis-aligned ground truth. Orientation-blind.

    Raises:
        GroundTruthKindError: gt is not TARGET_AXIS_ALIGNED
    """
    _require_kind(gt, GroundTruthKind.TARGET_AXIS_ALIGNED, "assign_second_stage_projection")
    gt_rects = transformed_ground_truth(gt, gamma, enlargement_mode)
    rows = _rotated_rows(proposals)
    if len(gt) == 0:
        return AssignmentBatch.empty(rows.shape[0])
    return assign_by_iou(iou_aabb_matrix(project_rotated_array(rows), gt_rects), positive_threshold)


def reliability_switch(assignments: AssignmentBatch, gt: GroundTruthSet, cfg: HeuristicConfig) -> AssignmentBatch:
    """
    Set the reliability flag g of positives from their assigned target box.

    With r = long side / short side of the box:
        keep_small: g = 1 iff r > aspect_ratio_min or area < area_threshold
        mask_small: g = 1 iff r > aspect_ratio_min and area >= area_threshold
    Negatives keep g = 1.

    Raises:
        GroundTruthKindError: gt is not TARGET_AXIS_ALIGNED
    """
    _require_kind(gt, GroundTruthKind.TARGET_AXIS_ALIGNED, "reliability_switch")
    reliable = np.ones(len(assignments), dtype=bool)
    if len(gt) == 0:
        return assignments.with_reliable(reliable)

    arr = gt.as_array()
    width = arr[:, 2] - arr[:, 0]
    height = arr[:, 3] - arr[:, 1]
    short = np.minimum(width, height)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(short > 0, np.maximum(width, height) / short, np.inf)
    area = width * height

    elongated = ratio > cfg.aspect_ratio_min
    if cfg.area_rule == "keep_small":
        box_reliable = elongated | (area < cfg.area_threshold)
    else:
        box_reliable = elongated & (area >= cfg.area_threshold)

    positives = np.flatnonzero(assignments.positive)
    reliable[positives] = box_reliable[assignments.sigma[positives]]
    logger.debug("Reliability switch masked %d of %d positives", int((~reliable).sum()), positives.size)
    return assignments.with_reliable(reliable)


def assign_second_stage_heuristic(proposals: RotatedInput,
                                  gt: GroundTruthSet,
                                  cfg: HeuristicConfig,
                                  positive_threshold: float = POSITIVE_IOU_THRESHOLD) -> AssignmentBatch:
    """Source-style matching against target boxes read as theta = 0, then the reliability switch."""
    _require_kind(gt, GroundTruthKind.TARGET_AXIS_ALIGNED, "assign_second_stage_heuristic")
    rows = _rotated_rows(proposals)
    if len(gt) == 0:
        return AssignmentBatch.empty(rows.shape[0])
    matched = assign_second_stage_source(rows, gt.as_axis_rotated(), positive_threshold)
    return reliability_switch(matched, gt, cfg)
