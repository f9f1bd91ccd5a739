"""
Axis-aligned annotation tables for target datasets.

CSV rows are ``image_id,xmin,ymin,xmax,ymax,label[,difficult]`` with an
optional header row. JSON is a list of objects with the same keys, or an
object holding that list under ``annotations``.
"""

import csv
import io
import math
from typing import Any, Dict, List, Mapping, Optional, Union

import pandas as pd

from src.core.exceptions import AnnotationBoxError, ParseError
from src.core.logger import get_logger
from src.core.utils import decode_text, dump_json, load_json
from src.data.convert import object_as_aabox
from src.objects.annotations import AnnotationObject, AnnotationRecord
from src.objects.boxes import AABox

logger = get_logger(__name__, module_name="dataio")

AXIS_FORMATS = ("csv", "json")
COLUMNS = ("image_id", "xmin", "ymin", "xmax", "ymax", "label", "difficult")
_TRUE = {"1", "true", "yes"}
_FALSE = {"0", "false", "no", ""}


def _number(value: Any, line: Optional[int], field: str) -> float:
    if isinstance(value, bool):
        raise ParseError(f"expected a number, got {value!r}", line=line, field=field)
    try:
        number = float(value)
    except (TypeError, ValueError, OverflowError):
        raise ParseError(f"expected a number, got {value!r}", line=line, field=field) from None
    if not math.isfinite(number):
        raise ParseError(f"{value!r} is not finite", line=line, field=field)
    return number


def _flag(value: Any, line: Optional[int], field: str) -> bool:
    if isinstance(value, bool):
        return value
    token = str(value).strip().lower()
    if token in _TRUE:
        return True
    if token in _FALSE:
        return False
    raise ParseError(f"unknown difficulty {value!r}", line=line, field=field)


def _row(image_id: Any, xmin: Any, ymin: Any, xmax: Any, ymax: Any, label: Any, difficult: Any,
         line: Optional[int], where: str) -> Dict[str, Any]:
    def loc(name: str) -> str:
        return f"{where}.{name}" if where else name

    if not isinstance(image_id, (str, int)) or isinstance(image_id, bool) or not str(image_id).strip():
        raise ParseError("image_id must be a non-empty string", line=line, field=loc("image_id"))
    if not isinstance(label, str) or not label.strip():
        raise ParseError("label must be a non-empty string", line=line, field=loc("label"))
    row = {
        "image_id": str(image_id).strip(),
        "xmin": _number(xmin, line, loc("xmin")),
        "ymin": _number(ymin, line, loc("ymin")),
        "xmax": _number(xmax, line, loc("xmax")),
        "ymax": _number(ymax, line, loc("ymax")),
        "label": label.strip(),
        "difficult": _flag(difficult, line, loc("difficult")),
        "line": line,
        "where": where,
    }
    if row["xmin"] > row["xmax"]:
        raise AnnotationBoxError(f"xmin {row['xmin']} > xmax {row['xmax']}", line=line, field=loc("xmin"))
    if row["ymin"] > row["ymax"]:
        raise AnnotationBoxError(f"ymin {row['ymin']} > ymax {row['ymax']}", line=line, field=loc("ymin"))
    return row


def _csv_rows(text: str) -> List[Dict[str, Any]]:
    rows = []
    reader = csv.reader(io.StringIO(text, newline=""))
    first = True
    while True:
        try:
            fields = next(reader)
        except StopIteration:
            break
        except csv.Error as e:
            raise ParseError(f"malformed CSV: {e}", line=reader.line_num) from e
        line_no = reader.line_num
        if not fields or all(not f.strip() for f in fields):
            continue
        is_first, first = first, False
        fields = [f.strip() for f in fields]
        if is_first and fields[0].lower() == "image_id":
            continue
        if len(fields) not in (6, 7):
            raise ParseError(f"expected 6 or 7 fields, found {len(fields)}", line=line_no)
        difficult = fields[6] if len(fields) == 7 else False
        rows.append(_row(*fields[:6], difficult, line=line_no, where=""))
    return rows


def _json_rows(text: str) -> List[Dict[str, Any]]:
    doc = load_json(text)
    prefix = "annotations"
    if isinstance(doc, dict):
        if "annotations" not in doc:
            raise ParseError("missing 'annotations' list", field="annotations")
        doc = doc["annotations"]
    if not isinstance(doc, list):
        raise ParseError("expected a list of annotations", field=prefix)
    rows = []
    for k, item in enumerate(doc):
        where = f"{prefix}[{k}]"
        if not isinstance(item, dict):
            raise ParseError("expected an object", field=where)
        missing = [name for name in COLUMNS[:6] if name not in item]
        if missing:
            raise ParseError(f"missing keys {missing}", field=where)
        rows.append(_row(item["image_id"], item["xmin"], item["ymin"], item["xmax"], item["ymax"],
                         item["label"], item.get("difficult", False), line=None, where=where))
    return rows


def parse_axis_aligned(text: Union[str, bytes], fmt: str = "csv") -> Dict[str, AnnotationRecord]:
    """
    Parse axis-aligned annotations into one record per image id, in first-seen order.

    Raises:
        ParseError: Malformed input, located by line (CSV) or JSON path
        AnnotationBoxError: xmin > xmax or ymin > ymax (also an InvalidBox)
    """
    if fmt not in AXIS_FORMATS:
        raise ParseError(f"unknown axis-aligned format {fmt!r}")
    text = decode_text(text)
    rows = _csv_rows(text) if fmt == "csv" else _json_rows(text)
    frame = pd.DataFrame(rows, columns=list(COLUMNS) + ["line", "where"])

    records: Dict[str, AnnotationRecord] = {}
    for image_id, group in frame.groupby("image_id", sort=False):
        objects = tuple(
            AnnotationObject(AABox(r.xmin, r.ymin, r.xmax, r.ymax), r.label, bool(r.difficult))
            for r in group.itertuples(index=False)
        )
        records[str(image_id)] = AnnotationRecord(str(image_id), objects)
    logger.debug("Parsed %d axis-aligned boxes over %d images", len(frame), len(records))
    return records


def axis_aligned_frame(records: Mapping[str, AnnotationRecord]) -> pd.DataFrame:
    """
    Flatten records to one row per object.

    Non axis-aligned shapes are replaced by their external rectangle.
    """
    rows = []
    for image_id, record in records.items():
        for obj in record.objects:
            box = object_as_aabox(obj)
            rows.append((image_id, box.xmin, box.ymin, box.xmax, box.ymax, obj.label, int(obj.difficult)))
    return pd.DataFrame(rows, columns=list(COLUMNS))


def write_axis_aligned(records: Mapping[str, AnnotationRecord], fmt: str = "csv", pretty: bool = False) -> str:
    """Render records as axis-aligned CSV (with header) or JSON."""
    if fmt not in AXIS_FORMATS:
        raise ParseError(f"unknown axis-aligned format {fmt!r}")
    frame = axis_aligned_frame(records)
    if fmt == "csv":
        return frame.to_csv(index=False, float_format="%.10g", lineterminator="\n")
    items = [
        {**row, "difficult": bool(row["difficult"])}
        for row in frame.to_dict(orient="records")
    ]
    return dump_json({"annotations": items}, pretty)
