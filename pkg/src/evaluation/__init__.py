from src.evaluation.matching import MatchResult, ground_truth_boxes, match_detections
from src.evaluation.metrics import average_precision, precision_envelope, precision_recall
from src.evaluation.nms import rotated_nms
from src.evaluation.report import EvalReport, ImageCounts, evaluate_dataset, precision_at_recall

__all__ = [
    "EvalReport",
    "ImageCounts",
    "MatchResult",
    "average_precision",
    "evaluate_dataset",
    "ground_truth_boxes",
    "match_detections",
    "precision_at_recall",
    "precision_envelope",
    "precision_recall",
    "rotated_nms",
]
