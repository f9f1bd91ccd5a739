from src.losses.breakdown import LossBreakdown
from src.losses.objective import ObjectiveSettings, evaluate_objective, example_loss, loss_gradient
from src.losses.terms import (
    binary_cross_entropy,
    combined_loss,
    midpoint_offset_targets,
    rcnn_loss_source,
    rcnn_loss_target,
    regression_penalty,
    rpn_loss_source,
    rpn_loss_target,
    wrap_angle,
)

__all__ = [
    "LossBreakdown",
    "ObjectiveSettings",
    "binary_cross_entropy",
    "combined_loss",
    "evaluate_objective",
    "example_loss",
    "loss_gradient",
    "midpoint_offset_targets",
    "rcnn_loss_source",
    "rcnn_loss_target",
    "regression_penalty",
    "rpn_loss_source",
    "rpn_loss_target",
    "wrap_angle",
]
