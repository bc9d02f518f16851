"""Axis-aligned boxes in normalized corner format, and the overlap/regression
measures used by matching and quality scoring.

Scalar functions take :class:`BoundingBox` values. The ``*_matrix`` variants
take ``(N, 4)`` arrays of ``(x_min, y_min, x_max, y_max)`` rows and return
``(N, M)`` pairwise results; they are what the cost and quality code uses in
bulk.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True, slots=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        for c in coords:
            if not (0.0 <= c <= 1.0):
                raise ValueError(f"box coordinate {c!r} outside [0, 1]: {coords}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"box corners out of order: {coords}")

    @classmethod
    def from_seq(cls, values: Iterable[float]) -> "BoundingBox":
        x0, y0, x1, y1 = (float(v) for v in values)
        return cls(x0, y0, x1, y1)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def to_cxcywh(self) -> tuple[float, float, float, float]:
        return (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
            self.width,
            self.height,
        )


def _intersection(a: BoundingBox, b: BoundingBox) -> float:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    return max(w, 0.0) * max(h, 0.0)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    inter = _intersection(a, b)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def giou(a: BoundingBox, b: BoundingBox) -> float:
    """Generalized IoU: IoU minus the share of the enclosing box not covered
    by the union. Two zero-area boxes at the same point give 0."""
    inter = _intersection(a, b)
    union = a.area + b.area - inter
    enclose = (max(a.x_max, b.x_max) - min(a.x_min, b.x_min)) * (
        max(a.y_max, b.y_max) - min(a.y_min, b.y_min)
    )
    overlap = inter / union if union > 0.0 else 0.0
    if enclose <= 0.0:
        return overlap
    return overlap - (enclose - union) / enclose


def l1_box_distance(a: BoundingBox, b: BoundingBox) -> float:
    return float(sum(abs(p - q) for p, q in zip(a.to_cxcywh(), b.to_cxcywh())))


# -- vectorized -------------------------------------------------------------


def as_box_array(boxes: Sequence[BoundingBox] | np.ndarray) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        arr = np.asarray(boxes, dtype=np.float64)
    else:
        arr = np.array([b.as_tuple() for b in boxes], dtype=np.float64)
    return arr.reshape(-1, 4)


def box_area(boxes: np.ndarray) -> np.ndarray:
    return (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])


def xyxy_to_cxcywh(boxes: np.ndarray) -> np.ndarray:
    x0, y0, x1, y1 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    return np.stack([(x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0], axis=-1)


def _inter_union(boxes1: np.ndarray, boxes2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    area1 = box_area(boxes1)
    area2 = box_area(boxes2)
    lt = np.maximum(boxes1[:, None, :2], boxes2[None, :, :2])
    rb = np.minimum(boxes1[:, None, 2:], boxes2[None, :, 2:])
    wh = np.clip(rb - lt, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = area1[:, None] + area2[None, :] - inter
    return inter, union


def iou_matrix(boxes1: np.ndarray, boxes2: np.ndarray) -> np.ndarray:
    inter, union = _inter_union(boxes1, boxes2)
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def giou_matrix(boxes1: np.ndarray, boxes2: np.ndarray) -> np.ndarray:
    inter, union = _inter_union(boxes1, boxes2)
    overlap = np.zeros_like(inter)
    np.divide(inter, union, out=overlap, where=union > 0.0)
    lt = np.minimum(boxes1[:, None, :2], boxes2[None, :, :2])
    rb = np.maximum(boxes1[:, None, 2:], boxes2[None, :, 2:])
    wh = np.clip(rb - lt, 0.0, None)
    enclose = wh[..., 0] * wh[..., 1]
    penalty = np.zeros_like(inter)
    np.divide(enclose - union, enclose, out=penalty, where=enclose > 0.0)
    return overlap - penalty


def l1_matrix(boxes1: np.ndarray, boxes2: np.ndarray) -> np.ndarray:
    c1 = xyxy_to_cxcywh(boxes1)
    c2 = xyxy_to_cxcywh(boxes2)
    return np.abs(c1[:, None, :] - c2[None, :, :]).sum(axis=-1)


def normalize_box(values: np.ndarray) -> BoundingBox:
    """Clip four corner values to [0, 1] and reorder so min <= max."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    x0, x1 = sorted((float(v[0]), float(v[2])))
    y0, y1 = sorted((float(v[1]), float(v[3])))
    return BoundingBox(x0, y0, x1, y1)
