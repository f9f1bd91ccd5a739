"""
Detections and detection files.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List

from src.core.exceptions import InvalidBox
from src.objects.boxes import RotatedBox


@dataclass(frozen=True)
class Detection:
    """A scored rotated box. In single-class mode the score is the second-stage objectness."""
    box: RotatedBox
    score: float
    class_id: int = 0

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise InvalidBox(f"Detection score must be finite, got {self.score!r}")
        object.__setattr__(self, "score", float(self.score))


@dataclass
class DetectionFile:
    """Detections per image id."""
    images: Dict[str, List[Detection]] = field(default_factory=dict)

    def __len__(self) -> int:
        return sum(len(dets) for dets in self.images.values())

    def image_ids(self) -> List[str]:
        return sorted(self.images)
