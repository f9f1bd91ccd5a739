"""
Ground truth and annotation records.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, Sequence, Tuple, Union

import numpy as np

from src.core.exceptions import GroundTruthKindError, InvalidBox
from src.objects.boxes import AABox, Quad, RotatedBox

Shape = Union[Quad, AABox, RotatedBox]


class GroundTruthKind(Enum):
    """Source data carries rotated boxes, target data axis-aligned ones."""
    SOURCE_ROTATED = "source_rotated"
    TARGET_AXIS_ALIGNED = "target_axis_aligned"


@dataclass(frozen=True)
class GroundTruthSet:
    """
    Ground-truth boxes of one image.

    The kind fixes the box type: RotatedBox for SOURCE_ROTATED, AABox for
    TARGET_AXIS_ALIGNED. An empty set is allowed; assignment then labels
    every proposal negative.
    """
    kind: GroundTruthKind
    boxes: Tuple[Union[RotatedBox, AABox], ...] = ()
    labels: Tuple[int, ...] = ()

    def __post_init__(self):
        boxes = tuple(self.boxes)
        expected = RotatedBox if self.kind is GroundTruthKind.SOURCE_ROTATED else AABox
        for i, box in enumerate(boxes):
            if not isinstance(box, expected):
                raise GroundTruthKindError(
                    f"{self.kind.value} ground truth needs {expected.__name__} boxes; "
                    f"box {i} is {type(box).__name__}"
                )
        labels = tuple(int(label) for label in self.labels) if self.labels else (0,) * len(boxes)
        if len(labels) != len(boxes):
            raise InvalidBox(f"Got {len(labels)} labels for {len(boxes)} boxes")
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def source(cls, boxes: Sequence[RotatedBox], labels: Sequence[int] = ()) -> "GroundTruthSet":
        return cls(GroundTruthKind.SOURCE_ROTATED, tuple(boxes), tuple(labels))

    @classmethod
    def target(cls, boxes: Sequence[AABox], labels: Sequence[int] = ()) -> "GroundTruthSet":
        return cls(GroundTruthKind.TARGET_AXIS_ALIGNED, tuple(boxes), tuple(labels))

    @property
    def is_source(self) -> bool:
        return self.kind is GroundTruthKind.SOURCE_ROTATED

    def __len__(self) -> int:
        return len(self.boxes)

    def __iter__(self) -> Iterator[Union[RotatedBox, AABox]]:
        return iter(self.boxes)

    def single_class(self) -> "GroundTruthSet":
        """Collapse every label to class 0."""
        return GroundTruthSet(self.kind, self.boxes, (0,) * len(self.boxes))

    def as_array(self) -> np.ndarray:
        """(M, 5) rotated rows or (M, 4) axis-aligned rows, by kind."""
        width = 5 if self.is_source else 4
        return np.asarray([b.as_tuple() for b in self.boxes], dtype=float).reshape(-1, width)

    def as_axis_rotated(self) -> "GroundTruthSet":
        """Target boxes read as theta = 0 rotated boxes (source-style matching)."""
        if self.is_source:
            return self
        rotated = [b.as_rotated() for b in self.boxes if b.width > 0 and b.height > 0]
        if len(rotated) != len(self.boxes):
            raise InvalidBox("Zero-extent axis-aligned boxes cannot be read as rotated boxes")
        return GroundTruthSet.source(rotated, self.labels)


# =============================================================================
# ANNOTATION FILES
# =============================================================================

@dataclass(frozen=True)
class AnnotationObject:
    """One annotated object: its outline, category label and difficulty flag."""
    shape: Shape
    label: str
    difficult: bool = False

    def __post_init__(self):
        label = self.label.strip()
        if not label:
            raise InvalidBox("Annotation labels must be non-empty")
        object.__setattr__(self, "label", label)

    def to_rotated(self) -> RotatedBox:
        # local import keeps objects free of a geometry import cycle
        from src.geometry.conversions import quad_to_rotated

        if isinstance(self.shape, RotatedBox):
            return self.shape
        if isinstance(self.shape, AABox):
            return self.shape.as_rotated()
        return quad_to_rotated(self.shape)


@dataclass(frozen=True)
class AnnotationRecord:
    """
    Annotations of one image.

    Attributes:
        image_id: Identifier, usually the annotation file stem
        objects: Annotated objects in file order
        metadata: Header values such as 'imagesource' and 'gsd'
    """
    image_id: str
    objects: Tuple[AnnotationObject, ...] = ()
    metadata: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    def __len__(self) -> int:
        return len(self.objects)

    def labels(self) -> Tuple[str, ...]:
        return tuple(obj.label for obj in self.objects)

    def difficult_mask(self) -> np.ndarray:
        return np.array([obj.difficult for obj in self.objects], dtype=bool)

    def rotated_boxes(self) -> Tuple[RotatedBox, ...]:
        return tuple(obj.to_rotated() for obj in self.objects)
