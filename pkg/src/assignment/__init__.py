from src.assignment.results import NO_MATCH, AssignmentBatch, AssignmentResult, positive_recall
from src.assignment.rules import (
    assign_by_iou,
    assign_first_stage,
    assign_second_stage_heuristic,
    assign_second_stage_projection,
    assign_second_stage_source,
    reliability_switch,
    transformed_ground_truth,
)

__all__ = [
    "NO_MATCH",
    "AssignmentBatch",
    "AssignmentResult",
    "assign_by_iou",
    "assign_first_stage",
    "assign_second_stage_heuristic",
    "assign_second_stage_projection",
    "assign_second_stage_source",
    "positive_recall",
    "reliability_switch",
    "transformed_ground_truth",
]
