"""
Path and Table Utilities Module

Cross-platform path handling plus whole-file readers and writers for the
text, JSON and tabular artifacts the toolkit produces.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd

from src.core.exceptions import ConfigError, ParseError

# Format-specific imports with graceful degradation
try:
    import pyarrow.parquet as pq
    PARQUET_AVAILABLE = True
except ImportError:
    PARQUET_AVAILABLE = False

TABLE_FORMATS = ("csv", "parquet")


# =============================================================================
# PATH UTILITIES
# =============================================================================

def ensure_directory_exists(path: Union[str, Path]) -> Path:
    """Ensure directory exists, creating it if necessary."""
    dir_path = Path(path)
    dir_path.mkdir(parents=True, exist_ok=True)
    return dir_path


def get_files_in_directory(directory: Union[str, Path],
                           pattern: str = "*",
                           recursive: bool = False) -> List[Path]:
    """Sorted files in directory matching pattern; empty when the directory is missing."""
    dir_path = Path(directory)

    if not dir_path.is_dir():
        return []

    found = dir_path.rglob(pattern) if recursive else dir_path.glob(pattern)
    return sorted(p for p in found if p.is_file())


# =============================================================================
# TEXT AND JSON
# =============================================================================

def decode_text(data: Union[str, bytes]) -> str:
    """UTF-8 text from str or bytes; undecodable bytes raise ParseError at their line."""
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        line = data[:e.start].count(b"\n") + 1
        raise ParseError(f"invalid UTF-8 at byte {e.start}", line=line) from e


def read_text(path: Union[str, Path]) -> str:
    """Read a whole UTF-8 file; a missing file raises FileNotFoundError."""
    return decode_text(Path(path).read_bytes())


def write_text(path: Union[str, Path], text: str) -> Path:
    path_obj = Path(path)
    ensure_directory_exists(path_obj.parent)
    path_obj.write_text(text, encoding="utf-8")
    return path_obj


def dump_json(obj: Any, pretty: bool = False) -> str:
    if pretty:
        return json.dumps(obj, indent=2, sort_keys=False) + "\n"
    return json.dumps(obj, separators=(",", ":")) + "\n"


def write_json(path: Union[str, Path], obj: Any, pretty: bool = True) -> Path:
    return write_text(path, dump_json(obj, pretty))


def load_json(text: Union[str, bytes]) -> Any:
    """Parse JSON, reporting syntax errors with their line."""
    text = decode_text(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno) from e
    except (ValueError, RecursionError) as e:
        # oversized integer literals and pathological nesting
        raise ParseError(f"unreadable JSON: {e}", line=1) from e


# =============================================================================
# TABLES
# =============================================================================

def write_table(df: pd.DataFrame, path: Union[str, Path], fmt: str = "csv") -> Path:
    """
    Write a DataFrame as CSV or snappy-compressed Parquet.

    Raises:
        ConfigError: Unknown format, or Parquet requested without pyarrow
    """
    if fmt not in TABLE_FORMATS:
        raise ConfigError(f"Unknown table format '{fmt}'; expected one of {TABLE_FORMATS}")
    path_obj = Path(path)
    ensure_directory_exists(path_obj.parent)
    if fmt == "parquet":
        if not PARQUET_AVAILABLE:
            raise ConfigError("pyarrow is required for parquet output")
        df.to_parquet(path_obj, engine="pyarrow", compression="snappy", index=False)
    else:
        df.to_csv(path_obj, index=False, float_format="%.10g")
    return path_obj


def get_parquet_metadata_info(file_path: Union[str, Path]) -> Dict[str, Any]:
    """Row count and column schema of a parquet file without loading data."""
    if not PARQUET_AVAILABLE:
        raise ImportError("pyarrow is required for parquet metadata extraction")

    parquet_file = pq.ParquetFile(Path(file_path))
    metadata = parquet_file.metadata
    schema = parquet_file.schema_arrow
    return {
        "rows": metadata.num_rows,
        "columns": len(schema),
        "column_names": [field.name for field in schema],
        "data_types": {field.name: str(field.type) for field in schema},
        "num_row_groups": metadata.num_row_groups,
    }
