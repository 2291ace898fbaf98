"""Axis-aligned box arithmetic shared by fusion, linking, and evaluation.

A box is a length-4 array-like ``[x1, y1, x2, y2]`` in continuous pixel
coordinates with ``x2 > x1`` and ``y2 > y1``. Intersection uses open-interval
overlap: ``width = max(0, min(x2a, x2b) - max(x1a, x1b))``. All functions are
pure and safe to call from any number of workers.
"""

from __future__ import annotations

import numpy as np


def as_boxes(boxes) -> np.ndarray:
    """Coerce to a float64 (N, 4) array without validating contents."""
    arr = np.asarray(boxes, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, 4) if arr.size == 4 else arr.reshape(-1, 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected boxes of shape (N, 4), got {arr.shape}")
    return arr


def validate_boxes(boxes, context: str = "box") -> np.ndarray:
    """Coerce and reject degenerate boxes.

    Raises ValueError when any coordinate is non-finite, or when a box has
    non-positive width or height. Returns the validated (N, 4) array.
    """
    arr = as_boxes(boxes)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{context}: non-finite coordinate")
    if arr.size and not (np.all(arr[:, 2] > arr[:, 0]) and np.all(arr[:, 3] > arr[:, 1])):
        raise ValueError(f"{context}: degenerate box (requires x2 > x1 and y2 > y1)")
    return arr


def box_area(boxes) -> np.ndarray:
    """Areas of (N, 4) boxes; scalar-friendly via ``float(box_area(b)[0])``."""
    arr = as_boxes(boxes)
    return (arr[:, 2] - arr[:, 0]) * (arr[:, 3] - arr[:, 1])


def area(box) -> float:
    """Area of a single box ``[x1, y1, x2, y2]``."""
    x1, y1, x2, y2 = (float(v) for v in box)
    return (x2 - x1) * (y2 - y1)


def iou(a, b) -> float:
    """Intersection-over-Union of two boxes.

    Symmetric, in [0, 1], exactly 1.0 for identical boxes and 0.0 for
    disjoint ones.
    """
    ax1, ay1, ax2, ay2 = (float(v) for v in a)
    bx1, by1, bx2, by2 = (float(v) for v in b)
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU between (N, 4) and (M, 4) boxes as an (N, M) array.

    Hot loop of path linking; fully vectorized.
    """
    a = as_boxes(a)
    b = as_boxes(b)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)), dtype=np.float64)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union


def paired_iou(a, b) -> np.ndarray:
    """Elementwise IoU of two (N, 4) arrays, row i against row i."""
    a = as_boxes(a)
    b = as_boxes(b)
    if a.shape != b.shape:
        raise ValueError(f"paired_iou shape mismatch: {a.shape} vs {b.shape}")
    iw = np.minimum(a[:, 2], b[:, 2]) - np.maximum(a[:, 0], b[:, 0])
    ih = np.minimum(a[:, 3], b[:, 3]) - np.maximum(a[:, 1], b[:, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    return inter / (area_a + area_b - inter)
