"""
DOTA annotation text.

One object per line:

    x1 y1 x2 y2 x3 y3 x4 y4 category difficulty

optionally preceded by ``imagesource:<text>`` and ``gsd:<value>`` header
lines. Coordinates are pixels, origin top-left, y pointing down; quads are
stored counter-clockwise in that pixel frame.
"""

import math
import re
from pathlib import Path
from typing import Dict, List, Union

from src.core.exceptions import GeometryError, InvalidBox, ParseError
from src.core.logger import get_logger
from src.core.utils import decode_text, get_files_in_directory, read_text, write_text
from src.geometry.conversions import rotated_corners
from src.objects.annotations import AnnotationObject, AnnotationRecord
from src.objects.boxes import AABox, Quad, RotatedBox

logger = get_logger(__name__, module_name="dataio")

HEADER_KEYS = ("imagesource", "gsd")
_HEADER = re.compile(r"^\s*(imagesource|gsd)\s*:(.*)$", re.IGNORECASE)
_DIFFICULTY = {"0": False, "1": True}
_COORD_FIELDS = tuple(f"{axis}{k}" for k in range(1, 5) for axis in ("x", "y"))

# Pixel coordinates beyond this are rejected as corrupt
MAX_COORDINATE = 1e9


def _parse_coordinate(token: str, line_no: int, field: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"non-numeric coordinate {token!r}", line=line_no, field=field) from None
    if not math.isfinite(value):
        raise ParseError(f"coordinate {token!r} is not finite", line=line_no, field=field)
    if abs(value) > MAX_COORDINATE:
        raise ParseError(f"coordinate {token!r} out of range", line=line_no, field=field)
    return value


def _parse_object(fields: List[str], line_no: int) -> AnnotationObject:
    if len(fields) != 10:
        raise ParseError(f"expected 10 fields, found {len(fields)}", line=line_no)
    coords = [_parse_coordinate(tok, line_no, name) for tok, name in zip(fields[:8], _COORD_FIELDS)]
    difficulty = fields[9]
    if difficulty not in _DIFFICULTY:
        raise ParseError(f"unknown difficulty token {difficulty!r}", line=line_no, field="difficulty")
    try:
        quad = Quad(tuple(zip(coords[0::2], coords[1::2])))
    except GeometryError as e:
        raise ParseError(str(e), line=line_no, field="quad") from e
    return AnnotationObject(quad, fields[8], _DIFFICULTY[difficulty])


def parse_dota(text: Union[str, bytes], image_id: str = "") -> AnnotationRecord:
    """
    Parse one DOTA annotation file.

    Blank lines are skipped, header lines go to ``metadata``.

    Raises:
        ParseError: With the 1-based line number of the first bad line
    """
    text = decode_text(text)
    metadata: Dict[str, str] = {}
    objects: List[AnnotationObject] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        header = _HEADER.match(line)
        if header:
            metadata[header.group(1).lower()] = header.group(2).strip()
            continue
        objects.append(_parse_object(line.split(), line_no))
    return AnnotationRecord(image_id, tuple(objects), metadata)


def _outline(obj: AnnotationObject):
    shape = obj.shape
    if isinstance(shape, Quad):
        return shape.points
    if isinstance(shape, AABox):
        return ((shape.xmin, shape.ymin), (shape.xmax, shape.ymin),
                (shape.xmax, shape.ymax), (shape.xmin, shape.ymax))
    if isinstance(shape, RotatedBox):
        return tuple(map(tuple, rotated_corners(shape)))
    raise InvalidBox(f"Unsupported annotation shape {type(shape).__name__}")


def write_dota(record: AnnotationRecord) -> str:
    """
    Render a record as DOTA text, coordinates with 6 significant digits.

    Axis-aligned boxes and rotated boxes are written as their corner quads.
    """
    lines = [f"{key}:{record.metadata[key]}" for key in HEADER_KEYS if key in record.metadata]
    for obj in record.objects:
        if any(ch.isspace() for ch in obj.label):
            raise InvalidBox(f"DOTA labels cannot contain whitespace: {obj.label!r}")
        coords = " ".join(f"{v:.6g}" for point in _outline(obj) for v in point)
        lines.append(f"{coords} {obj.label} {int(obj.difficult)}")
    return "\n".join(lines) + "\n" if lines else ""


def read_dota_file(path: Union[str, Path]) -> AnnotationRecord:
    path_obj = Path(path)
    return parse_dota(read_text(path_obj), image_id=path_obj.stem)


def read_dota_directory(directory: Union[str, Path], pattern: str = "*.txt") -> Dict[str, AnnotationRecord]:
    """Every annotation file in a label folder, keyed by file stem."""
    records = {}
    for path in get_files_in_directory(directory, pattern):
        records[path.stem] = read_dota_file(path)
    logger.debug("Read %d DOTA files from %s", len(records), directory)
    return records


def write_dota_directory(records: Dict[str, AnnotationRecord], directory: Union[str, Path]) -> List[Path]:
    """One ``<image_id>.txt`` per record."""
    return [write_text(Path(directory) / f"{image_id}.txt", write_dota(record))
            for image_id, record in sorted(records.items())]
