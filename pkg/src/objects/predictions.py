"""
Per-proposal predictions fed to the losses.

Box columns are decoded quantities in image units; logits are pre-sigmoid
objectness. ``reference`` holds the (width, height) used to normalise
regression residuals and is treated as a constant by the losses.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.core.constants import PROBABILITY_EPSILON
from src.objects.boxes import MidpointOffsetProposal
from src.objects.detections import Detection

RPN_BOX_COLUMNS = ("cx", "cy", "w", "h", "alpha", "beta")
RCNN_BOX_COLUMNS = ("cx", "cy", "w", "h", "theta")


def probability_to_logit(p: np.ndarray, epsilon: float = PROBABILITY_EPSILON) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=float), epsilon, 1.0 - epsilon)
    return np.log(p) - np.log1p(-p)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form does not overflow for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


@dataclass
class RpnPredictions:
    """First-stage outputs: boxes (N, 6) as cx, cy, w, h, alpha, beta; logits (N,)."""
    boxes: np.ndarray
    logits: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=float).reshape(-1, 6)
        self.logits = np.asarray(self.logits, dtype=float).reshape(-1)
        self.reference = np.asarray(self.reference, dtype=float).reshape(-1, 2)

    def __len__(self) -> int:
        return self.boxes.shape[0]

    @classmethod
    def from_proposals(cls, proposals: Sequence[MidpointOffsetProposal],
                       reference: Optional[np.ndarray] = None) -> "RpnPredictions":
        """Wrap proposals; residuals are normalised by their own extents unless given."""
        boxes = np.array([(p.cx, p.cy, p.w, p.h, p.alpha, p.beta) for p in proposals], dtype=float).reshape(-1, 6)
        logits = probability_to_logit(np.array([p.p for p in proposals], dtype=float))
        if reference is None:
            reference = boxes[:, 2:4].copy()
        return cls(boxes, logits, reference)


@dataclass
class RcnnPredictions:
    """Second-stage outputs: boxes (N, 5) as cx, cy, w, h, theta; logits (N,)."""
    boxes: np.ndarray
    logits: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=float).reshape(-1, 5)
        self.logits = np.asarray(self.logits, dtype=float).reshape(-1)
        self.reference = np.asarray(self.reference, dtype=float).reshape(-1, 2)

    def __len__(self) -> int:
        return self.boxes.shape[0]

    @classmethod
    def from_detections(cls, detections: Sequence[Detection],
                        reference: Optional[np.ndarray] = None) -> "RcnnPredictions":
        """Wrap scored boxes, reading each score as the objectness p*."""
        boxes = np.array([d.box.as_tuple() for d in detections], dtype=float).reshape(-1, 5)
        logits = probability_to_logit(np.array([d.score for d in detections], dtype=float))
        if reference is None:
            reference = boxes[:, 2:4].copy()
        return cls(boxes, logits, reference)
