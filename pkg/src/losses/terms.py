"""
Per-image loss terms of the two stages.

Every term has the same shape:

    L = (1/N) * [ sum_i BCE(p_i, y_i) + sum_{i positive} sum_k rho(r_ik) ]

with N the number of proposals, y_i the positive flag, r_ik the regression
residual of parameter k and rho either |r| or smooth-l1. Probabilities are
clamped to [eps, 1 - eps]; inside the clamp the logit gradient is
(p - y) / N, outside it is 0.

Residual normalisation ('proposal'): x, w and alpha residuals are divided by
the reference width; y, h and beta residuals by the reference height; the
angle residual is wrapped into [-pi/2, pi/2) and left in radians.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.assignment.results import AssignmentBatch
from src.config.config_objects import LossConfig
from src.core.exceptions import EmptyGroundTruth, GroundTruthKindError, LossError
from src.core.logger import get_logger
from src.geometry.batch import enlarge_aabox_array
from src.geometry.conversions import theta_to_midpoint_offset
from src.losses.breakdown import LossBreakdown
from src.objects.annotations import GroundTruthSet
from src.objects.boxes import MidpointOffsetProposal, RotatedBox
from src.objects.detections import Detection
from src.objects.predictions import RcnnPredictions, RpnPredictions, sigmoid

logger = get_logger(__name__, module_name="losses")

RpnInput = Union[RpnPredictions, Sequence[MidpointOffsetProposal]]
RcnnInput = Union[RcnnPredictions, Sequence[Detection]]

SECOND_STAGE_MODES = ("projection", "heuristic")


# =============================================================================
# BUILDING BLOCKS
# =============================================================================

def binary_cross_entropy(logits: np.ndarray, labels: np.ndarray, weights: np.ndarray,
                         epsilon: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Clamped BCE per proposal and its derivative w.r.t. the logit.

    Args:
        logits: (N,) pre-sigmoid objectness
        labels: (N,) bool, True for positives
        weights: (N,) multiplier of each proposal's term
        epsilon: probability clamp

    Returns:
        (losses, d_losses / d_logits), both (N,)
    """
    p = sigmoid(logits)
    clamped = np.clip(p, epsilon, 1.0 - epsilon)
    losses = np.where(labels, -np.log(clamped), -np.log1p(-clamped)) * weights
    inside = (p > epsilon) & (p < 1.0 - epsilon)
    grads = np.where(inside, (p - labels.astype(float)) * weights, 0.0)
    return losses, grads


def regression_penalty(residuals: np.ndarray, cfg: LossConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Elementwise rho(r) and rho'(r) for l1 or smooth-l1."""
    if cfg.regression == "l1":
        return np.abs(residuals), np.sign(residuals)
    beta = cfg.smooth_l1_beta
    small = np.abs(residuals) < beta
    values = np.where(small, 0.5 * residuals ** 2 / beta, np.abs(residuals) - 0.5 * beta)
    grads = np.where(small, residuals / beta, np.sign(residuals))
    return values, grads


def wrap_angle(delta: np.ndarray) -> np.ndarray:
    """Wrap angle differences into [-pi/2, pi/2); rectangles repeat every pi."""
    return (delta + np.pi / 2.0) % np.pi - np.pi / 2.0


def _normalizers(reference: np.ndarray, columns: Sequence[str], cfg: LossConfig) -> np.ndarray:
    n = reference.shape[0]
    scale = np.ones((n, len(columns)))
    if cfg.regression_normalization == "none":
        return scale
    for k, name in enumerate(columns):
        if name in ("cx", "w", "alpha"):
            scale[:, k] = reference[:, 0]
        elif name in ("cy", "h", "beta"):
            scale[:, k] = reference[:, 1]
    if np.any(scale <= 0.0):
        raise LossError("Reference extents must be positive for 'proposal' normalisation")
    return scale


def _matched_targets(assignments: AssignmentBatch, gt: GroundTruthSet, n: int,
                     positives: np.ndarray) -> np.ndarray:
    if len(assignments) != n:
        raise LossError(f"{len(assignments)} assignments for {n} proposals")
    idx = np.flatnonzero(positives)
    if idx.size and len(gt) == 0:
        raise EmptyGroundTruth("Positive assignments against an empty ground-truth set")
    sigma = assignments.sigma[idx]
    if np.any((sigma < 0) | (sigma >= len(gt))):
        raise LossError("Positive assignment points outside the ground-truth set")
    return sigma


def _assemble(predicted: np.ndarray, logits: np.ndarray, reference: np.ndarray, labels: np.ndarray,
              bce_weights: np.ndarray, regress: np.ndarray, targets: np.ndarray,
              columns: Sequence[str], cfg: LossConfig, angle_column: Optional[int] = None
              ) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Combine BCE over all proposals with regression over ``regress``.

    ``targets`` holds one row per regressed proposal, aligned with
    np.flatnonzero(regress), for the first len(columns) box columns.
    """
    n = predicted.shape[0]
    grad_boxes = np.zeros_like(predicted)
    if n == 0:
        return 0.0, grad_boxes, np.zeros(0)

    bce, grad_logits = binary_cross_entropy(logits, labels, bce_weights, cfg.epsilon)
    total = float(np.sum(bce))

    idx = np.flatnonzero(regress)
    if idx.size:
        k = len(columns)
        scale = _normalizers(reference[idx], columns, cfg)
        delta = predicted[idx, :k] - targets
        if angle_column is not None:
            delta[:, angle_column] = wrap_angle(delta[:, angle_column])
        values, slopes = regression_penalty(delta / scale, cfg)
        total += float(np.sum(values))
        grad_boxes[idx, :k] = slopes / scale

    return total / n, grad_boxes / n, grad_logits / n


def _require_ground_truth(gt: GroundTruthSet, source: bool, op: str) -> None:
    if gt.is_source != source:
        wanted = "rotated source" if source else "axis-aligned target"
        raise GroundTruthKindError(f"{op} needs {wanted} ground truth, got {gt.kind.value}")


def _as_rpn(proposals: RpnInput) -> RpnPredictions:
    return proposals if isinstance(proposals, RpnPredictions) else RpnPredictions.from_proposals(proposals)


def _as_rcnn(refinements: RcnnInput) -> RcnnPredictions:
    return refinements if isinstance(refinements, RcnnPredictions) else RcnnPredictions.from_detections(refinements)


def midpoint_offset_targets(boxes: Sequence[RotatedBox]) -> np.ndarray:
    """(M, 6) first-stage source targets cx, cy, w, h, alpha, beta."""
    rows = []
    for box in boxes:
        enc = theta_to_midpoint_offset(box)
        rows.append((enc.cx, enc.cy, enc.w, enc.h, enc.alpha, enc.beta))
    return np.asarray(rows, dtype=float).reshape(-1, 6)


# =============================================================================
# FIRST STAGE
# =============================================================================

def rpn_loss_source(proposals: RpnInput, gt: GroundTruthSet, assignments: AssignmentBatch,
                    cfg: Optional[LossConfig] = None) -> LossBreakdown:
    """
    First-stage loss on source images: BCE plus regression of all six
    midpoint-offset parameters against the encoded rotated ground truth.

    Returns:
        LossBreakdown with L_S set and output gradients 'rpn_boxes', 'rpn_logits'
    """
    cfg = cfg or LossConfig()
    _require_ground_truth(gt, True, "rpn_loss_source")
    pred = _as_rpn(proposals)
    positives = assignments.positive
    sigma = _matched_targets(assignments, gt, len(pred), positives)
    targets = midpoint_offset_targets(gt.boxes)[sigma] if sigma.size else np.zeros((0, 6))
    value, grad_boxes, grad_logits = _assemble(
        pred.boxes, pred.logits, pred.reference, positives, np.ones(len(pred)),
        positives, targets, ("cx", "cy", "w", "h", "alpha", "beta"), cfg,
    )
    return LossBreakdown(L_S=value, output_gradients={"rpn_boxes": grad_boxes, "rpn_logits": grad_logits})


def rpn_loss_target(proposals: RpnInput, gt: GroundTruthSet, assignments: AssignmentBatch,
                    gamma: float = 1.0, cfg: Optional[LossConfig] = None,
                    enlargement_mode: str = "scale") -> LossBreakdown:
    """
    First-stage loss on target images: BCE plus regression of cx, cy, w, h
    against the enlarged axis-aligned ground truth. alpha and beta receive
    exactly zero gradient.

    Raises:
        InvalidGamma: gamma < 1
    """
    cfg = cfg or LossConfig()
    _require_ground_truth(gt, False, "rpn_loss_target")
    pred = _as_rpn(proposals)
    positives = assignments.positive
    sigma = _matched_targets(assignments, gt, len(pred), positives)
    enlarged = enlarge_aabox_array(gt.as_array().reshape(-1, 4), gamma, enlargement_mode)
    centre_form = np.stack([
        (enlarged[:, 0] + enlarged[:, 2]) / 2.0,
        (enlarged[:, 1] + enlarged[:, 3]) / 2.0,
        enlarged[:, 2] - enlarged[:, 0],
        enlarged[:, 3] - enlarged[:, 1],
    ], axis=1)
    targets = centre_form[sigma]
    value, grad_boxes, grad_logits = _assemble(
        pred.boxes, pred.logits, pred.reference, positives, np.ones(len(pred)),
        positives, targets, ("cx", "cy", "w", "h"), cfg,
    )
    return LossBreakdown(L_T=value, output_gradients={"rpn_boxes": grad_boxes, "rpn_logits": grad_logits})


# =============================================================================
# SECOND STAGE
# =============================================================================

def rcnn_loss_source(refinements: RcnnInput, gt: GroundTruthSet, assignments: AssignmentBatch,
                     cfg: Optional[LossConfig] = None) -> LossBreakdown:
    """
    Second-stage loss on source images: BCE on p* plus class-agnostic
    regression of (x, y, w, h, theta) against the long-side labelled box.
    """
    cfg = cfg or LossConfig()
    _require_ground_truth(gt, True, "rcnn_loss_source")
    pred = _as_rcnn(refinements)
    positives = assignments.positive
    sigma = _matched_targets(assignments, gt, len(pred), positives)
    if sigma.size:
        canonical = np.asarray([b.canonical_long_side().as_tuple() for b in gt.boxes], dtype=float)
        targets = canonical[sigma]
    else:
        targets = np.zeros((0, 5))
    value, grad_boxes, grad_logits = _assemble(
        pred.boxes, pred.logits, pred.reference, positives, np.ones(len(pred)),
        positives, targets, ("cx", "cy", "w", "h", "theta"), cfg, angle_column=4,
    )
    return LossBreakdown(L_S_star=value,
                         output_gradients={"rcnn_boxes": grad_boxes, "rcnn_logits": grad_logits})


def rcnn_loss_target(refinements: RcnnInput, gt: GroundTruthSet, assignments: AssignmentBatch,
                     mode: str = "projection", cfg: Optional[LossConfig] = None) -> LossBreakdown:
    """
    Second-stage loss on target images: objectness BCE only.

    In 'heuristic' mode the positive term of each proposal is multiplied by
    its reliability flag g; masked positives contribute nothing.
    """
    cfg = cfg or LossConfig()
    if mode not in SECOND_STAGE_MODES:
        raise LossError(f"Unknown second-stage target mode {mode!r}; expected one of {SECOND_STAGE_MODES}")
    _require_ground_truth(gt, False, "rcnn_loss_target")
    pred = _as_rcnn(refinements)
    positives = assignments.positive
    _matched_targets(assignments, gt, len(pred), positives)
    weights = np.ones(len(pred))
    if mode == "heuristic":
        weights = np.where(positives & ~assignments.reliable, 0.0, 1.0)
        logger.debug("Heuristic mode masks %d of %d positives", int((weights == 0.0).sum()), int(positives.sum()))
    no_regression = np.zeros(len(pred), dtype=bool)
    value, grad_boxes, grad_logits = _assemble(
        pred.boxes, pred.logits, pred.reference, positives, weights,
        no_regression, np.zeros((0, 5)), ("cx", "cy", "w", "h", "theta"), cfg,
    )
    return LossBreakdown(L_T_star=value,
                         output_gradients={"rcnn_boxes": grad_boxes, "rcnn_logits": grad_logits})


# =============================================================================
# COMBINATION
# =============================================================================

def combined_loss(source_batch: Union[LossBreakdown, Sequence[LossBreakdown]],
                  target_batch: Union[LossBreakdown, Sequence[LossBreakdown]],
                  weights: Union[LossConfig, Tuple[float, float], None] = None) -> LossBreakdown:
    """
    L = w_s * (L_S + L_S*) + w_t * (L_T + L_T*), unweighted by default.

    Sequences are summed first; an empty sequence contributes nothing.
    Only source components are read from the source batch and only target
    components from the target batch.
    """
    if weights is None:
        source_weight, target_weight = 1.0, 1.0
    elif isinstance(weights, LossConfig):
        source_weight, target_weight = weights.source_weight, weights.target_weight
    else:
        source_weight, target_weight = weights

    source = source_batch if isinstance(source_batch, LossBreakdown) else LossBreakdown.sum(source_batch)
    target = target_batch if isinstance(target_batch, LossBreakdown) else LossBreakdown.sum(target_batch)
    return LossBreakdown(
        L_S=source_weight * source.L_S,
        L_S_star=source_weight * source.L_S_star,
        L_T=target_weight * target.L_T,
        L_T_star=target_weight * target.L_T_star,
    )
