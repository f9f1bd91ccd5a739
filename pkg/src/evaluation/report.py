"""
Dataset-level AP50 evaluation.

Detections of all images are pooled and ranked by (score descending,
image id, detection index) before the precision-recall curve is built, so
the report does not depend on image order.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from src.config.config_objects import EvaluationConfig
from src.core.exceptions import ZeroGroundTruth
from src.core.logger import get_logger
from src.evaluation.matching import GroundTruthInput, match_detections
from src.evaluation.metrics import average_precision, precision_envelope, precision_recall
from src.evaluation.nms import rotated_nms
from src.objects.detections import Detection

logger = get_logger(__name__, module_name="evaluation")


@dataclass
class ImageCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    ignored: int = 0

    def to_dict(self) -> Dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "ignored": self.ignored}


@dataclass
class EvalReport:
    """
    AP50 with the pooled precision-recall curve.

    ``precision`` and ``recall`` have one point per ranked, non-ignored
    detection; recall is non-decreasing along the ranking.
    """
    ap50: float
    n_gt: int
    precision: np.ndarray
    recall: np.ndarray
    scores: np.ndarray
    per_image: Dict[str, ImageCounts] = field(default_factory=dict)
    iou_threshold: float = 0.5

    @property
    def n_detections(self) -> int:
        return int(self.scores.size)

    def pr_curve_frame(self) -> pd.DataFrame:
        """Rank, score, precision, interpolated precision and recall per point."""
        return pd.DataFrame({
            "rank": np.arange(1, self.n_detections + 1),
            "score": self.scores,
            "precision": self.precision,
            "interpolated_precision": precision_envelope(self.precision),
            "recall": self.recall,
        })

    def to_dict(self, include_curve: bool = True) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            "ap50": self.ap50,
            "iou_threshold": self.iou_threshold,
            "n_gt": self.n_gt,
            "n_detections": self.n_detections,
            "per_image": {image_id: counts.to_dict() for image_id, counts in sorted(self.per_image.items())},
        }
        if include_curve:
            result["precision"] = self.precision.tolist()
            result["recall"] = self.recall.tolist()
        return result


def precision_at_recall(report: EvalReport, recall: float) -> float:
    """Interpolated precision: best precision at any point with recall >= the level (0 if none)."""
    reached = report.recall >= recall - 1e-12
    if not np.any(reached):
        return 0.0
    return float(np.max(report.precision[reached]))


def evaluate_dataset(predictions: Mapping[str, Sequence[Detection]],
                     ground_truth: Mapping[str, GroundTruthInput],
                     cfg: Optional[EvaluationConfig] = None) -> EvalReport:
    """
    Pool per-image matches into one AP50.

    Images with predictions but no ground-truth entry count all their
    detections as false positives; images without predictions contribute
    their boxes as misses.

    Raises:
        ZeroGroundTruth: No countable ground-truth box in the dataset
    """
    cfg = cfg or EvaluationConfig()
    rows: List[Dict[str, Any]] = []
    per_image: Dict[str, ImageCounts] = {}
    n_gt = 0

    for image_id in sorted(set(predictions) | set(ground_truth)):
        dets = list(predictions.get(image_id, ()))
        if cfg.nms_threshold is not None:
            dets = rotated_nms(dets, cfg.nms_threshold)
        gt = ground_truth.get(image_id, ())
        match = match_detections(dets, gt, cfg.iou_threshold, cfg.skip_difficult)
        n_gt += match.n_gt
        per_image[image_id] = ImageCounts(match.n_tp, match.n_fp, match.n_fn, int(match.ignored.sum()))
        for k, det in enumerate(dets):
            if match.ignored[k]:
                continue
            rows.append({"score": det.score, "image_id": image_id, "index": k, "tp": bool(match.tp[k])})

    if n_gt == 0:
        raise ZeroGroundTruth("AP is undefined for a dataset without ground-truth boxes")

    pooled = pd.DataFrame(rows, columns=["score", "image_id", "index", "tp"])
    pooled = pooled.sort_values(["score", "image_id", "index"], ascending=[False, True, True], kind="mergesort")
    flags = pooled["tp"].to_numpy(dtype=bool)
    precision, recall = precision_recall(flags, n_gt)
    ap = average_precision(flags, n_gt)
    logger.debug("Evaluated %d images: %d detections, %d boxes, AP50 %.4f",
                 len(per_image), flags.size, n_gt, ap)
    return EvalReport(
        ap50=ap,
        n_gt=n_gt,
        precision=precision,
        recall=recall,
        scores=pooled["score"].to_numpy(dtype=float),
        per_image=per_image,
        iou_threshold=cfg.iou_threshold,
    )
