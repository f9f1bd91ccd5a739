"""
Precision-recall curves and all-point average precision.
"""

from typing import Sequence, Tuple

import numpy as np

from src.core.exceptions import ZeroGroundTruth


def precision_recall(flags: Sequence[bool], n_gt: int) -> Tuple[np.ndarray, np.ndarray]:
    """Cumulative precision and recall of TP flags in rank order."""
    if n_gt <= 0:
        raise ZeroGroundTruth("Precision and recall are undefined without ground truth")
    flags = np.asarray(flags, dtype=bool).reshape(-1)
    tp = np.cumsum(flags)
    ranks = np.arange(1, flags.size + 1)
    return tp / ranks, tp / float(n_gt)


def precision_envelope(precision: np.ndarray) -> np.ndarray:
    """Running maximum from the right: precision made non-increasing in rank."""
    if precision.size == 0:
        return precision.copy()
    return np.maximum.accumulate(precision[::-1])[::-1]


def average_precision(flags: Sequence[bool], n_gt: int) -> float:
    """
    All-point interpolated AP: sum over ranks of recall gained times the
    precision envelope at that rank.

    Examples:
        >>> average_precision([True, False, True], 2)
        0.8333333333333333

    Raises:
        ZeroGroundTruth: n_gt == 0
    """
    precision, recall = precision_recall(flags, n_gt)
    if precision.size == 0:
        return 0.0
    envelope = precision_envelope(precision)
    gained = np.diff(np.concatenate([[0.0], recall]))
    return float(np.clip(np.sum(gained * envelope), 0.0, 1.0))
