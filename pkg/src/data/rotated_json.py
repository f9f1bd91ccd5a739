"""
Rotated-box annotation documents (schema ``kcr.rotated_boxes`` version 1).

    {"schema": "kcr.rotated_boxes", "version": 1,
     "images": {"<image_id>": [{"cx": .., "cy": .., "w": .., "h": .., "theta": ..,
                                "label": "..", "difficult": false}, ...]}}
"""

from typing import Any, Dict, Mapping, Union

from src.core.constants import ROTATED_BOXES_SCHEMA, SCHEMA_VERSION
from src.core.exceptions import AnnotationBoxError, InvalidBox, ParseError
from src.core.utils import dump_json, load_json
from src.data.schema import check_schema, require_images, require_number
from src.objects.annotations import AnnotationObject, AnnotationRecord
from src.objects.boxes import RotatedBox

BOX_KEYS = ("cx", "cy", "w", "h", "theta")


def _parse_object(item: Any, where: str) -> AnnotationObject:
    if not isinstance(item, dict):
        raise ParseError("expected an object", field=where)
    values = [require_number(item, key, where) for key in BOX_KEYS]
    label = item.get("label", "object")
    if not isinstance(label, str) or not label.strip():
        raise ParseError("label must be a non-empty string", field=f"{where}.label")
    difficult = item.get("difficult", False)
    if not isinstance(difficult, bool):
        raise ParseError("difficult must be true or false", field=f"{where}.difficult")
    try:
        box = RotatedBox(*values)
    except InvalidBox as e:
        raise AnnotationBoxError(str(e), field=where) from e
    return AnnotationObject(box, label, difficult)


def parse_rotated_boxes(text: Union[str, bytes]) -> Dict[str, AnnotationRecord]:
    """
    Raises:
        SchemaVersionError: Wrong schema name or version
        ParseError: Malformed document, located by JSON path
    """
    doc = load_json(text)
    check_schema(doc, ROTATED_BOXES_SCHEMA)
    records = {}
    for image_id, items in require_images(doc).items():
        where = f"images.{image_id}"
        if not isinstance(items, list):
            raise ParseError("expected a list of boxes", field=where)
        objects = tuple(_parse_object(item, f"{where}[{k}]") for k, item in enumerate(items))
        records[image_id] = AnnotationRecord(image_id, objects)
    return records


def write_rotated_boxes(records: Mapping[str, AnnotationRecord], pretty: bool = False) -> str:
    """Every shape is written as its rotated box; images sorted by id."""
    images = {}
    for image_id in sorted(records):
        items = []
        for obj in records[image_id].objects:
            box = obj.to_rotated()
            items.append({
                "cx": box.cx, "cy": box.cy, "w": box.w, "h": box.h, "theta": box.theta,
                "label": obj.label, "difficult": obj.difficult,
            })
        images[image_id] = items
    doc: Dict[str, Any] = {"schema": ROTATED_BOXES_SCHEMA, "version": SCHEMA_VERSION, "images": images}
    return dump_json(doc, pretty)
