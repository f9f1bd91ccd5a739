"""
One image prepared for a gradient step.

Assignments and second-stage references are frozen when the example is
built, so the objective is a smooth function of the predictor parameters
away from l1 kinks and decode clips.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from src.assignment.results import AssignmentBatch
from src.objects.annotations import GroundTruthSet


class LossStrategy(Enum):
    """Which loss terms an image contributes, and to which domain."""
    SOURCE = "source"                        # rotated labels, source terms
    TARGET_PROJECTION = "target_projection"  # enlarged boxes, projection stage two
    TARGET_HEURISTIC = "target_heuristic"    # enlarged boxes, heuristic stage two
    TARGET_AXIS = "target_axis"              # target terms, stage two matched against theta = 0 boxes
    TARGET_NAIVE = "target_naive"            # target boxes read as theta = 0, source-style terms
    TARGET_ROTATED = "target_rotated"        # oracle rotated labels on target images

    @property
    def is_source(self) -> bool:
        return self is LossStrategy.SOURCE


@dataclass
class TrainingExample:
    """
    Attributes:
        image_id: Scene identifier
        strategy: Loss terms to apply
        features: (N, F) per-proposal features
        anchors: (N, 4) anchor centre form ax, ay, aw, ah
        first_stage_gt: Ground truth read by the first-stage loss
        first_stage_assignments: Frozen first-stage assignments
        references: (N, 5) detached decoded first-stage boxes
        second_stage_gt: Ground truth read by the second-stage loss
        second_stage_assignments: Frozen second-stage assignments
    """
    image_id: str
    strategy: LossStrategy
    features: np.ndarray
    anchors: np.ndarray
    first_stage_gt: GroundTruthSet
    first_stage_assignments: AssignmentBatch
    references: np.ndarray
    second_stage_gt: GroundTruthSet
    second_stage_assignments: AssignmentBatch

    def __len__(self) -> int:
        return self.features.shape[0]
