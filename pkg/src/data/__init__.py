from src.data.axis_aligned import parse_axis_aligned, write_axis_aligned
from src.data.convert import object_as_aabox, to_axis_aligned_records, to_rotated_records
from src.data.detections import (
    read_detections,
    read_detections_file,
    write_detections,
    write_detections_file,
)
from src.data.dota import parse_dota, read_dota_directory, read_dota_file, write_dota, write_dota_directory
from src.data.formats import ANNOTATION_FORMATS, read_annotations, render_annotations
from src.data.rotated_json import parse_rotated_boxes, write_rotated_boxes
from src.data.summary import aspect_ratio_summary, object_frame

__all__ = [
    "ANNOTATION_FORMATS",
    "aspect_ratio_summary",
    "object_as_aabox",
    "object_frame",
    "parse_axis_aligned",
    "parse_dota",
    "parse_rotated_boxes",
    "read_annotations",
    "read_detections",
    "read_detections_file",
    "read_dota_directory",
    "read_dota_file",
    "render_annotations",
    "to_axis_aligned_records",
    "to_rotated_records",
    "write_axis_aligned",
    "write_detections",
    "write_detections_file",
    "write_dota",
    "write_dota_directory",
    "write_rotated_boxes",
]
