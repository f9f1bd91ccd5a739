"""
Detection files (schema ``kcr.detections`` version 1).

    {"schema": "kcr.detections", "version": 1,
     "images": {"<image_id>": [{"cx": .., "cy": .., "w": .., "h": .., "theta": ..,
                                "score": .., "class_id": 0}, ...]}}

theta must already be canonical, in [-pi/2, pi/2); score lies in [0, 1].
The JSON Schema is shipped as docs/detection_schema_v1.json.
"""

import math
from pathlib import Path
from typing import Any, Dict, Union

from src.core.constants import DETECTION_SCHEMA, SCHEMA_VERSION
from src.core.exceptions import InvalidBox, ParseError
from src.core.utils import dump_json, load_json, read_text, write_text
from src.data.schema import check_schema, require_images, require_number
from src.objects.boxes import RotatedBox
from src.objects.detections import Detection, DetectionFile


def _parse_detection(item: Any, where: str) -> Detection:
    if not isinstance(item, dict):
        raise ParseError("expected an object", field=where)
    cx, cy, w, h, theta = (require_number(item, key, where) for key in ("cx", "cy", "w", "h", "theta"))
    if not -math.pi / 2.0 <= theta < math.pi / 2.0:
        raise ParseError(f"theta {theta} outside [-pi/2, pi/2)", field=f"{where}.theta")
    score = require_number(item, "score", where)
    if not 0.0 <= score <= 1.0:
        raise ParseError(f"score {score} outside [0, 1]", field=f"{where}.score")
    class_id = item.get("class_id", 0)
    if isinstance(class_id, bool) or not isinstance(class_id, int):
        raise ParseError(f"class_id must be an integer, got {class_id!r}", field=f"{where}.class_id")
    try:
        box = RotatedBox(cx, cy, w, h, theta)
    except InvalidBox as e:
        raise ParseError(str(e), field=where) from e
    return Detection(box, score, class_id)


def read_detections(text: Union[str, bytes]) -> DetectionFile:
    """
    Raises:
        SchemaVersionError: Unknown schema name or version
        ParseError: Anything else malformed, located by JSON path
    """
    doc = load_json(text)
    check_schema(doc, DETECTION_SCHEMA)
    images: Dict[str, list] = {}
    for image_id, items in require_images(doc).items():
        where = f"images.{image_id}"
        if not isinstance(items, list):
            raise ParseError("expected a list of detections", field=where)
        images[image_id] = [_parse_detection(item, f"{where}[{k}]") for k, item in enumerate(items)]
    return DetectionFile(images)


def write_detections(detections: DetectionFile, pretty: bool = False) -> str:
    images = {
        image_id: [
            {"cx": d.box.cx, "cy": d.box.cy, "w": d.box.w, "h": d.box.h, "theta": d.box.theta,
             "score": d.score, "class_id": d.class_id}
            for d in detections.images[image_id]
        ]
        for image_id in detections.image_ids()
    }
    return dump_json({"schema": DETECTION_SCHEMA, "version": SCHEMA_VERSION, "images": images}, pretty)


def read_detections_file(path: Union[str, Path]) -> DetectionFile:
    return read_detections(read_text(path))


def write_detections_file(path: Union[str, Path], detections: DetectionFile, pretty: bool = False) -> Path:
    return write_text(path, write_detections(detections, pretty))
