"""Triplets, predictions, the triplet matching cost, cost-matrix assembly and
the per-pair training loss (evaluated as a diagnostic only).

Class spaces carry the no-relation/no-object class at their last index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from speaq.assignment import FORBIDDEN
from speaq.errors import LengthMismatchError, UnknownClassError
from speaq.geometry import (
    BoundingBox,
    as_box_array,
    giou,
    giou_matrix,
    l1_box_distance,
    l1_matrix,
)
from speaq.grouping import PredicateGrouping, QueryGrouping

CE_EPS = 1e-12
PROB_TOL = 1e-6


@dataclass(frozen=True)
class GtTriplet:
    subject_box: BoundingBox | None = None
    object_box: BoundingBox | None = None
    subject_class: int | None = None
    object_class: int | None = None
    predicate_class: int | None = None
    predicate_box: BoundingBox | None = None
    is_null: bool = False

    def __post_init__(self) -> None:
        required = (
            self.subject_box,
            self.object_box,
            self.subject_class,
            self.object_class,
            self.predicate_class,
        )
        if self.is_null:
            if any(v is not None for v in required) or self.predicate_box is not None:
                raise ValueError("a null triplet carries no boxes or classes")
        elif any(v is None for v in required):
            raise ValueError("a non-null triplet needs both boxes and all three classes")

    @classmethod
    def null(cls) -> "GtTriplet":
        return cls(is_null=True)


NULL_GT = GtTriplet.null()


def _prob_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if (arr < 0).any() or not np.isfinite(arr).all():
        raise ValueError(f"{name} must be finite and nonnegative")
    if abs(arr.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"{name} sums to {arr.sum()!r}, expected 1")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Prediction:
    subject_box: BoundingBox
    object_box: BoundingBox
    subject_probs: np.ndarray
    object_probs: np.ndarray
    predicate_probs: np.ndarray
    query_index: int
    predicate_box: BoundingBox | None = None

    def __post_init__(self) -> None:
        for name in ("subject_probs", "object_probs", "predicate_probs"):
            object.__setattr__(self, name, _prob_vector(getattr(self, name), name))
        if self.query_index < 1:
            raise ValueError(f"query_index is 1-based, got {self.query_index}")


@dataclass(frozen=True)
class CostWeights:
    w_cls: float = 1.0
    w_l1: float = 5.0
    w_giou: float = 2.0
    include_predicate_box: bool = False

    def __post_init__(self) -> None:
        for name in ("w_cls", "w_l1", "w_giou"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


# Training-loss weights share the same shape.
LossWeights = CostWeights


def _class_prob(probs: np.ndarray, class_id: int) -> float:
    if not 0 <= class_id < len(probs):
        raise UnknownClassError(f"class {class_id} outside 0..{len(probs) - 1}")
    return float(probs[class_id])


def entity_cost(
    class_id: int, box: BoundingBox, probs, pred_box: BoundingBox, w: CostWeights
) -> float:
    p = _class_prob(np.asarray(probs, dtype=np.float64), class_id)
    return (
        w.w_cls * -p
        + w.w_l1 * l1_box_distance(box, pred_box)
        + w.w_giou * (1.0 - giou(box, pred_box))
    )


def match_cost(t: GtTriplet, p: Prediction, w: CostWeights) -> float:
    if t.is_null:
        return 0.0
    c_s = entity_cost(t.subject_class, t.subject_box, p.subject_probs, p.subject_box, w)
    c_o = entity_cost(t.object_class, t.object_box, p.object_probs, p.object_box, w)
    c_p = w.w_cls * -_class_prob(p.predicate_probs, t.predicate_class)
    if w.include_predicate_box and t.predicate_box is not None and p.predicate_box is not None:
        c_p += w.w_l1 * l1_box_distance(t.predicate_box, p.predicate_box)
        c_p += w.w_giou * (1.0 - giou(t.predicate_box, p.predicate_box))
    return c_s + c_p + c_o


@dataclass(frozen=True, eq=False)
class PredictionBatch:
    """Column-stacked view of a prediction list for vectorized costs."""

    subject_boxes: np.ndarray
    object_boxes: np.ndarray
    subject_probs: np.ndarray
    object_probs: np.ndarray
    predicate_probs: np.ndarray
    query_index: np.ndarray
    predicate_boxes: np.ndarray | None = field(default=None)

    @classmethod
    def from_predictions(cls, preds: Sequence[Prediction]) -> "PredictionBatch":
        if not preds:
            raise ValueError("empty prediction list")

        def stack(name: str) -> np.ndarray:
            rows = [getattr(p, name) for p in preds]
            if len({r.shape for r in rows}) != 1:
                raise LengthMismatchError(f"{name} vectors differ in length across predictions")
            return np.stack(rows)

        pboxes = None
        if all(p.predicate_box is not None for p in preds):
            pboxes = as_box_array([p.predicate_box for p in preds])
        return cls(
            subject_boxes=as_box_array([p.subject_box for p in preds]),
            object_boxes=as_box_array([p.object_box for p in preds]),
            subject_probs=stack("subject_probs"),
            object_probs=stack("object_probs"),
            predicate_probs=stack("predicate_probs"),
            query_index=np.array([p.query_index for p in preds], dtype=np.int64),
            predicate_boxes=pboxes,
        )

    def __len__(self) -> int:
        return len(self.query_index)

    def to_predictions(self) -> list[Prediction]:
        return [
            Prediction(
                subject_box=BoundingBox.from_seq(self.subject_boxes[j]),
                object_box=BoundingBox.from_seq(self.object_boxes[j]),
                subject_probs=self.subject_probs[j],
                object_probs=self.object_probs[j],
                predicate_probs=self.predicate_probs[j],
                query_index=int(self.query_index[j]),
                predicate_box=(
                    BoundingBox.from_seq(self.predicate_boxes[j])
                    if self.predicate_boxes is not None
                    else None
                ),
            )
            for j in range(len(self))
        ]


def _check_class(class_id: int, n_classes: int) -> int:
    if not 0 <= class_id < n_classes:
        raise UnknownClassError(f"class {class_id} outside 0..{n_classes - 1}")
    return class_id


def _box_terms(gt_box: BoundingBox, boxes: np.ndarray, w: CostWeights) -> np.ndarray:
    g = gt_box.as_array()[None, :]
    return w.w_l1 * l1_matrix(g, boxes)[0] + w.w_giou * (1.0 - giou_matrix(g, boxes)[0])


def match_cost_row(t: GtTriplet, batch: PredictionBatch, w: CostWeights) -> np.ndarray:
    """``match_cost(t, p)`` for every prediction in ``batch``."""
    n = len(batch)
    if t.is_null:
        return np.zeros(n)
    s = _check_class(t.subject_class, batch.subject_probs.shape[1])
    o = _check_class(t.object_class, batch.object_probs.shape[1])
    r = _check_class(t.predicate_class, batch.predicate_probs.shape[1])
    c_s = w.w_cls * -batch.subject_probs[:, s] + _box_terms(t.subject_box, batch.subject_boxes, w)
    c_o = w.w_cls * -batch.object_probs[:, o] + _box_terms(t.object_box, batch.object_boxes, w)
    c_p = w.w_cls * -batch.predicate_probs[:, r]
    if w.include_predicate_box and t.predicate_box is not None and batch.predicate_boxes is not None:
        c_p = c_p + _box_terms(t.predicate_box, batch.predicate_boxes, w)
    return c_s + c_p + c_o


def gt_groups(gts: Sequence[GtTriplet], pg: PredicateGrouping) -> list[int | None]:
    mapping = pg.mapping()
    out: list[int | None] = []
    for t in gts:
        if t.is_null:
            out.append(None)
        elif t.predicate_class not in mapping:
            raise ValueError(f"predicate {t.predicate_class} belongs to no group")
        else:
            out.append(mapping[t.predicate_class])
    return out


def query_groups(batch: PredictionBatch, qg: QueryGrouping) -> np.ndarray:
    lookup = np.array(qg.group_of_each(), dtype=np.int64)
    if batch.query_index.max() > qg.n_q:
        raise ValueError(f"query index {batch.query_index.max()} outside 1..{qg.n_q}")
    return lookup[batch.query_index - 1]


def build_cost_matrix(
    gts: Sequence[GtTriplet],
    preds: Sequence[Prediction] | PredictionBatch,
    w: CostWeights,
    pg: PredicateGrouping | None = None,
    qg: QueryGrouping | None = None,
) -> np.ndarray:
    """Square matrix of matching costs between augmented GT slots (rows) and
    predictions (columns). With both groupings given, cross-group entries of
    non-null rows are FORBIDDEN."""
    batch = preds if isinstance(preds, PredictionBatch) else PredictionBatch.from_predictions(preds)
    n = len(batch)
    if len(gts) != n:
        raise LengthMismatchError(f"{len(gts)} GT slots vs {n} predictions")
    if (pg is None) != (qg is None):
        raise ValueError("pass both groupings or neither")

    out = np.zeros((n, n))
    rows: dict[int, np.ndarray] = {}
    for i, t in enumerate(gts):
        if t.is_null:
            continue
        key = id(t)
        if key not in rows:
            rows[key] = match_cost_row(t, batch, w)
        out[i] = rows[key]

    if pg is not None:
        g_rows = gt_groups(gts, pg)
        g_cols = query_groups(batch, qg)
        for i, g in enumerate(g_rows):
            if g is not None:
                out[i, g_cols != g] = FORBIDDEN
    return out


def _cross_entropy(probs: np.ndarray, target: int) -> float:
    return -math.log(_class_prob(probs, target) + CE_EPS)


def total_loss(t: GtTriplet, p: Prediction, lw: LossWeights = LossWeights()) -> tuple[float, float, float]:
    """Subject, predicate and object loss for one (slot, prediction) pair.

    Each term is weighted cross-entropy against the target class (the last,
    no-object index for a null slot) plus, for non-null slots, weighted L1 and
    GIoU box losses.
    """
    if t.is_null:
        return (
            lw.w_cls * _cross_entropy(p.subject_probs, len(p.subject_probs) - 1),
            lw.w_cls * _cross_entropy(p.predicate_probs, len(p.predicate_probs) - 1),
            lw.w_cls * _cross_entropy(p.object_probs, len(p.object_probs) - 1),
        )

    def box_loss(a: BoundingBox, b: BoundingBox) -> float:
        return lw.w_l1 * l1_box_distance(a, b) + lw.w_giou * (1.0 - giou(a, b))

    l_s = lw.w_cls * _cross_entropy(p.subject_probs, t.subject_class) + box_loss(
        t.subject_box, p.subject_box
    )
    l_o = lw.w_cls * _cross_entropy(p.object_probs, t.object_class) + box_loss(
        t.object_box, p.object_box
    )
    l_p = lw.w_cls * _cross_entropy(p.predicate_probs, t.predicate_class)
    if lw.include_predicate_box and t.predicate_box is not None and p.predicate_box is not None:
        l_p += box_loss(t.predicate_box, p.predicate_box)
    return (l_s, l_p, l_o)
