from src.geometry.conversions import (
    ENLARGEMENT_MODES,
    enlarge_aabox,
    midpoint_offset_to_rotated,
    project_rotated,
    quad_to_rotated,
    rotated_corners,
    rotated_to_quad,
    theta_to_midpoint_offset,
)
from src.geometry.clipping import (
    clip_convex_polygon,
    iou_aabb,
    iou_rotated,
    polygon_area,
    polygon_intersection_area,
)
from src.geometry.batch import (
    aaboxes_to_array,
    enlarge_aabox_array,
    array_to_rotated_boxes,
    iou_aabb_matrix,
    iou_rotated_matrix,
    midpoint_offsets_to_rotated_array,
    theta_to_midpoint_offsets_array,
    project_rotated_array,
    rotated_boxes_to_array,
    rotated_to_quads,
    set_max_workers,
)

__all__ = [
    "ENLARGEMENT_MODES",
    "aaboxes_to_array",
    "enlarge_aabox_array",
    "array_to_rotated_boxes",
    "clip_convex_polygon",
    "enlarge_aabox",
    "iou_aabb",
    "iou_aabb_matrix",
    "iou_rotated",
    "iou_rotated_matrix",
    "midpoint_offset_to_rotated",
    "midpoint_offsets_to_rotated_array",
    "polygon_area",
    "polygon_intersection_area",
    "project_rotated",
    "project_rotated_array",
    "quad_to_rotated",
    "rotated_boxes_to_array",
    "rotated_corners",
    "rotated_to_quad",
    "rotated_to_quads",
    "set_max_workers",
    "theta_to_midpoint_offset",
    "theta_to_midpoint_offsets_array",
]
