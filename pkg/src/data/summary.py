"""
Aspect-ratio statistics of annotation sets, for choosing heuristic thresholds.
"""

from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from src.objects.annotations import AnnotationRecord
from src.objects.boxes import AABox

DEFAULT_RATIO_BINS = (1.0, 1.5, 2.0, 3.0, 5.0, 10.0, np.inf)


def object_frame(records: Mapping[str, AnnotationRecord]) -> pd.DataFrame:
    """One row per object: image, label, aspect ratio (long / short side) and area."""
    rows = []
    for image_id, record in records.items():
        for obj in record.objects:
            if isinstance(obj.shape, AABox):
                width, height = obj.shape.width, obj.shape.height
            else:
                box = obj.to_rotated()
                width, height = box.w, box.h
            short = min(width, height)
            ratio = max(width, height) / short if short > 0 else np.inf
            rows.append((image_id, obj.label, ratio, width * height, obj.difficult))
    return pd.DataFrame(rows, columns=["image_id", "label", "aspect_ratio", "area", "difficult"])


def aspect_ratio_summary(records: Mapping[str, AnnotationRecord],
                         bins: Sequence[float] = DEFAULT_RATIO_BINS) -> pd.DataFrame:
    """
    Per-label aspect-ratio distribution.

    Columns: label, count, mean, median, p90, share_elongated (ratio > 3)
    and one ``share_<lo>_<hi>`` column per histogram bin. The last row,
    labelled ``__all__``, covers every object.
    """
    frame = object_frame(records)
    edges = list(bins)
    bin_names = [f"share_{lo:g}_{hi:g}" for lo, hi in zip(edges[:-1], edges[1:])]
    columns = ["label", "count", "mean", "median", "p90", "share_elongated"] + bin_names
    if frame.empty:
        return pd.DataFrame(columns=columns)

    def summarise(label: str, ratios: pd.Series) -> dict:
        finite = ratios[np.isfinite(ratios)]
        counts = pd.cut(finite, bins=edges, right=False).value_counts(sort=False).to_numpy()
        row = {
            "label": label,
            "count": int(len(ratios)),
            "mean": float(finite.mean()) if len(finite) else float("nan"),
            "median": float(finite.median()) if len(finite) else float("nan"),
            "p90": float(finite.quantile(0.9)) if len(finite) else float("nan"),
            "share_elongated": float((ratios > 3.0).mean()),
        }
        row.update({name: float(c) / len(ratios) for name, c in zip(bin_names, counts)})
        return row

    rows = [summarise(label, group["aspect_ratio"]) for label, group in frame.groupby("label", sort=True)]
    rows.append(summarise("__all__", frame["aspect_ratio"]))
    return pd.DataFrame(rows, columns=columns)
