"""
Shared checks for versioned JSON documents.
"""

import math
from typing import Any, Dict

from src.core.constants import SCHEMA_VERSION
from src.core.exceptions import ParseError, SchemaVersionError


def check_schema(doc: Any, schema: str, version: int = SCHEMA_VERSION) -> None:
    if not isinstance(doc, dict):
        raise ParseError("expected a JSON object at the top level", field="$")
    if doc.get("schema") != schema:
        raise SchemaVersionError(f"expected schema {schema!r}, got {doc.get('schema')!r}", field="schema")
    found = doc.get("version")
    if isinstance(found, bool) or found != version:
        raise SchemaVersionError(f"unsupported version {found!r}; this build reads {version}", field="version")


def require_images(doc: Dict[str, Any]) -> Dict[str, Any]:
    images = doc.get("images")
    if not isinstance(images, dict):
        raise ParseError("expected an 'images' object", field="images")
    return images


def require_number(item: Dict[str, Any], key: str, where: str) -> float:
    field = f"{where}.{key}"
    if key not in item:
        raise ParseError("missing value", field=field)
    value = item[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", field=field)
    try:
        number = float(value)
    except OverflowError:
        raise ParseError(f"number out of range: {value!r}", field=field) from None
    if not math.isfinite(number):
        raise ParseError(f"{value!r} is not finite", field=field)
    return number
