"""SVG figures: polylines with axes, labels and optional markers."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "thermokam"
plt.rcParams["svg.fonttype"] = "none"

_METADATA = {"Date": None, "Creator": None}


@dataclass(frozen=True)
class Series:
    x: np.ndarray
    y: np.ndarray
    label: Optional[str] = None
    style: str = "-"


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, format="svg", metadata=_METADATA)
    plt.close(fig)
    logger.debug("wrote figure %s", path)
    return path


def line_figure(path: str, series: Sequence[Series], *, xlabel: str, ylabel: str, title: str = "",
                vlines: Sequence[float] = (), hlines: Sequence[float] = ()) -> str:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for s in series:
        ax.plot(np.asarray(s.x), np.asarray(s.y), s.style, label=s.label, linewidth=1.2, markersize=3)
    for x in vlines:
        ax.axvline(x, color="grey", linestyle="--", linewidth=0.8)
    for y in hlines:
        ax.axhline(y, color="grey", linestyle=":", linewidth=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if any(s.label for s in series):
        ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def scatter_figure(path: str, x: np.ndarray, y: np.ndarray, groups: Sequence[str], *, xlabel: str, ylabel: str,
                   title: str = "") -> str:
    """Points coloured by group, one legend entry per group in first-seen order."""
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    x = np.asarray(x)
    y = np.asarray(y)
    labels = np.asarray(groups)
    for name in dict.fromkeys(labels.tolist()):
        sel = labels == name
        ax.plot(x[sel], y[sel], "o", markersize=3, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)
