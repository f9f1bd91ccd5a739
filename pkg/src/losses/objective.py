"""
Co-training objective over a batch of prepared images and its analytic
gradient with respect to the ToyPredictor parameters.

    L_total = w_s * mean_source(L_S + L_S*) + w_t * mean_target(L_T + L_T*)

Each image's terms are means over its proposals; domain means are over
images. Assignments and stage-two references are constants.
"""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

import numpy as np

from src.config.config_objects import LossConfig
from src.core.exceptions import LossError
from src.core.logger import get_logger
from src.losses.breakdown import LossBreakdown
from src.losses.terms import (
    combined_loss,
    rcnn_loss_source,
    rcnn_loss_target,
    rpn_loss_source,
    rpn_loss_target,
)
from src.objects.predictor import ToyPredictor
from src.objects.training import LossStrategy, TrainingExample

logger = get_logger(__name__, module_name="losses")

ParamsInput = Union[ToyPredictor, np.ndarray]


@dataclass(frozen=True)
class ObjectiveSettings:
    """Loss options shared by every image of a batch."""
    loss: LossConfig = field(default_factory=LossConfig)
    gamma: float = 1.0
    enlargement_mode: str = "scale"


def _as_predictor(params: ParamsInput, n_features: int) -> ToyPredictor:
    if isinstance(params, ToyPredictor):
        return params
    return ToyPredictor.from_flat(params, n_features)


def example_loss(model: ToyPredictor, example: TrainingExample,
                 settings: ObjectiveSettings) -> Tuple[LossBreakdown, np.ndarray]:
    """
    Loss terms of one image and their gradient w.r.t. the flat parameters.

    Returns:
        (breakdown, gradient) with the gradient unweighted by domain
    """
    cfg = settings.loss
    strategy = example.strategy
    rpn = model.forward_rpn(example.features, example.anchors)
    rcnn = model.forward_rcnn(example.features, example.references)

    if strategy is LossStrategy.TARGET_AXIS:
        first = rpn_loss_target(rpn.predictions, example.first_stage_gt, example.first_stage_assignments, 1.0, cfg)
        second = rcnn_loss_target(rcnn.predictions, example.second_stage_gt,
                                  example.second_stage_assignments, "projection", cfg)
    elif strategy in (LossStrategy.TARGET_PROJECTION, LossStrategy.TARGET_HEURISTIC):
        first = rpn_loss_target(rpn.predictions, example.first_stage_gt, example.first_stage_assignments,
                                settings.gamma, cfg, settings.enlargement_mode)
        mode = "projection" if strategy is LossStrategy.TARGET_PROJECTION else "heuristic"
        second = rcnn_loss_target(rcnn.predictions, example.second_stage_gt,
                                  example.second_stage_assignments, mode, cfg)
    else:
        first = rpn_loss_source(rpn.predictions, example.first_stage_gt, example.first_stage_assignments, cfg)
        second = rcnn_loss_source(rcnn.predictions, example.second_stage_gt,
                                  example.second_stage_assignments, cfg)

    grad_w1 = model.backward_rpn(rpn, example.features,
                                 first.output_gradients["rpn_boxes"], first.output_gradients["rpn_logits"])
    grad_w2 = model.backward_rcnn(rcnn, example.features,
                                  second.output_gradients["rcnn_boxes"], second.output_gradients["rcnn_logits"])
    breakdown = first + second
    if not strategy.is_source:
        breakdown = breakdown.as_target()
    return breakdown, np.concatenate([grad_w1.ravel(), grad_w2.ravel()])


def evaluate_objective(params: ParamsInput, batch: Sequence[TrainingExample],
                       settings: ObjectiveSettings = ObjectiveSettings()) -> LossBreakdown:
    """
    Weighted co-training loss of a batch with its parameter gradient attached.

    An empty batch gives zero loss and a zero gradient.
    """
    if isinstance(params, ToyPredictor):
        n_params = params.flat().size
    else:
        n_params = np.asarray(params).size
    if not batch:
        return LossBreakdown(gradient=np.zeros(n_params))

    n_features = batch[0].features.shape[1]
    if any(ex.features.shape[1] != n_features for ex in batch):
        raise LossError("All examples of a batch must share one feature width")
    model = _as_predictor(params, n_features)

    source_parts: List[LossBreakdown] = []
    target_parts: List[LossBreakdown] = []
    source_grads: List[np.ndarray] = []
    target_grads: List[np.ndarray] = []
    for example in batch:
        breakdown, gradient = example_loss(model, example, settings)
        if example.strategy.is_source:
            source_parts.append(breakdown)
            source_grads.append(gradient)
        else:
            target_parts.append(breakdown)
            target_grads.append(gradient)

    cfg = settings.loss
    total = combined_loss(LossBreakdown.mean(source_parts), LossBreakdown.mean(target_parts), cfg)
    gradient = np.zeros(model.flat().size)
    # Reductions run over a stacked axis, independent of image order up to rounding
    if source_grads:
        gradient = gradient + cfg.source_weight * np.mean(np.stack(source_grads), axis=0)
    if target_grads:
        gradient = gradient + cfg.target_weight * np.mean(np.stack(target_grads), axis=0)
    total.gradient = gradient
    logger.debug("Objective over %d source / %d target images: %.6f",
                 len(source_parts), len(target_parts), total.total)
    return total


def loss_gradient(params: ParamsInput, batch: Sequence[TrainingExample],
                  mode: ObjectiveSettings = ObjectiveSettings()) -> np.ndarray:
    """Analytic gradient of the combined loss w.r.t. the flat predictor parameters."""
    return evaluate_objective(params, batch, mode).gradient
