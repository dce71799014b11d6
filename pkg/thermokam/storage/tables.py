"""Deterministic table and summary files.

Identical inputs give byte-identical files: floats are written with a fixed
number of significant digits, "\n" line endings and sorted summary keys.
"""

from __future__ import annotations

import logging
import math
import os
from typing import Any, Dict, Mapping

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

DEFAULT_PRECISION = 17


def _ensure_parent(path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)


def write_table(frame: pd.DataFrame, path: str, *, precision: int = DEFAULT_PRECISION) -> str:
    _ensure_parent(path)
    frame.to_csv(path, index=False, float_format=f"%.{precision}g", lineterminator="\n")
    logger.debug("wrote %d rows to %s", len(frame), path)
    return path


def format_value(value: Any, precision: int = DEFAULT_PRECISION) -> str:
    if value is None:
        return "none"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.{precision}g}"
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v, precision) for v in value)
    return str(value)


def write_summary(values: Mapping[str, Any], path: str, *, precision: int = DEFAULT_PRECISION) -> str:
    """One key=value per line, keys sorted."""
    _ensure_parent(path)
    lines = [f"{key}={format_value(values[key], precision)}" for key in sorted(values)]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return path


def read_summary(path: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, value = line.partition("=")
            out[key] = value
    return out
