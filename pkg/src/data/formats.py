"""
Annotation format dispatch for conversion.

Formats:
    dota          one DOTA text file, or a directory of them
    rotated-json  kcr.rotated_boxes document
    axis-json     axis-aligned JSON annotations
    axis-csv      axis-aligned CSV annotations
"""

from pathlib import Path
from typing import Dict, Mapping, Union

from src.core.exceptions import ConfigError
from src.core.utils import read_text
from src.data.axis_aligned import parse_axis_aligned, write_axis_aligned
from src.data.convert import to_axis_aligned_records, to_rotated_records
from src.data.dota import parse_dota, read_dota_directory, write_dota
from src.data.rotated_json import parse_rotated_boxes, write_rotated_boxes
from src.objects.annotations import AnnotationRecord

ANNOTATION_FORMATS = ("dota", "rotated-json", "axis-json", "axis-csv")


def _require_format(fmt: str) -> None:
    if fmt not in ANNOTATION_FORMATS:
        raise ConfigError(f"Unknown annotation format '{fmt}'; expected one of {ANNOTATION_FORMATS}")


def read_annotations(path: Union[str, Path], fmt: str) -> Dict[str, AnnotationRecord]:
    """Read annotation records from a file (or a DOTA label directory)."""
    _require_format(fmt)
    path_obj = Path(path)
    if fmt == "dota":
        if path_obj.is_dir():
            return read_dota_directory(path_obj)
        return {path_obj.stem: parse_dota(read_text(path_obj), image_id=path_obj.stem)}
    text = read_text(path_obj)
    if fmt == "rotated-json":
        return parse_rotated_boxes(text)
    return parse_axis_aligned(text, "json" if fmt == "axis-json" else "csv")


def render_annotations(records: Mapping[str, AnnotationRecord], fmt: str, pretty: bool = False) -> str:
    """
    Render records in a single-file format.

    DOTA output holds one image; several images need write_dota_directory.
    """
    _require_format(fmt)
    if fmt == "dota":
        if len(records) != 1:
            raise ConfigError(f"DOTA text holds one image; got {len(records)}. Write to a directory instead")
        return write_dota(next(iter(records.values())))
    if fmt == "rotated-json":
        return write_rotated_boxes(to_rotated_records(records), pretty)
    return write_axis_aligned(to_axis_aligned_records(records), "json" if fmt == "axis-json" else "csv", pretty)
