"""
Shape conversions over annotation records.
"""

from typing import Dict, Mapping

from src.geometry.conversions import project_rotated
from src.objects.annotations import AnnotationObject, AnnotationRecord
from src.objects.boxes import AABox


def object_as_aabox(obj: AnnotationObject) -> AABox:
    """Axis-aligned boxes as they are; quads and rotated boxes by projection."""
    if isinstance(obj.shape, AABox):
        return obj.shape
    return project_rotated(obj.to_rotated())


def _map_shapes(records: Mapping[str, AnnotationRecord], convert) -> Dict[str, AnnotationRecord]:
    return {
        image_id: AnnotationRecord(
            record.image_id or image_id,
            tuple(AnnotationObject(convert(obj), obj.label, obj.difficult) for obj in record.objects),
            dict(record.metadata),
        )
        for image_id, record in records.items()
    }


def to_rotated_records(records: Mapping[str, AnnotationRecord]) -> Dict[str, AnnotationRecord]:
    """Every shape replaced by its minimum-area rotated box."""
    return _map_shapes(records, lambda obj: obj.to_rotated())


def to_axis_aligned_records(records: Mapping[str, AnnotationRecord]) -> Dict[str, AnnotationRecord]:
    """Every shape replaced by its external axis-aligned rectangle."""
    return _map_shapes(records, object_as_aabox)
