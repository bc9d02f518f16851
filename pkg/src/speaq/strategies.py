"""Quality-aware multi-assignment with groupwise query specialization, and the
baseline strategies it is compared against.

Pairs in an :class:`AssignmentResult` are ``(gt_index, prediction_position)``
with both indices 0-based into the caller's GT and prediction lists.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from speaq.assignment import hungarian
from speaq.cost_model import (
    CostWeights,
    GtTriplet,
    NULL_GT,
    Prediction,
    PredictionBatch,
    build_cost_matrix,
    gt_groups,
    match_cost_row,
)
from speaq.errors import CapacityExceededError, NullGtError, UnknownClassError
from speaq.geometry import iou_matrix
from speaq.grouping import PredicateGrouping, QueryGrouping


class RelationFn(str, enum.Enum):
    MIN = "min"
    MEAN = "mean"
    MAX = "max"

    def __call__(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self is RelationFn.MIN:
            return np.minimum(a, b)
        if self is RelationFn.MAX:
            return np.maximum(a, b)
        return (a + b) / 2.0


@dataclass(frozen=True)
class QualityConfig:
    k: int = 5
    lambda_rel: float = -0.5
    relation_fn: RelationFn = RelationFn.MAX

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        object.__setattr__(self, "relation_fn", RelationFn(self.relation_fn))


@dataclass(frozen=True, eq=False)
class QualityVectors:
    v_s: np.ndarray
    v_o: np.ndarray
    v_r: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class AssignmentResult:
    pairs: tuple[tuple[int, int], ...]
    d: tuple[int, ...]
    strategy: str
    total_cost: float

    @property
    def avg_d(self) -> float | None:
        return sum(self.d) / len(self.d) if self.d else None

    def assigned_predictions(self) -> set[int]:
        return {j for _, j in self.pairs}

    def gt_of_prediction(self) -> dict[int, int]:
        return {j: g for g, j in self.pairs}


def _batch(preds: Sequence[Prediction] | PredictionBatch) -> PredictionBatch:
    return preds if isinstance(preds, PredictionBatch) else PredictionBatch.from_predictions(preds)


def quality_vectors(
    t: GtTriplet, preds: Sequence[Prediction] | PredictionBatch, qc: QualityConfig
) -> QualityVectors:
    if t.is_null:
        raise NullGtError("quality vectors are undefined for a no-relation slot")
    batch = _batch(preds)
    if not 0 <= t.predicate_class < batch.predicate_probs.shape[1]:
        raise UnknownClassError(f"predicate class {t.predicate_class} out of range")
    v_s = iou_matrix(t.subject_box.as_array()[None, :], batch.subject_boxes)[0]
    v_o = iou_matrix(t.object_box.as_array()[None, :], batch.object_boxes)[0]
    v_r = batch.predicate_probs[:, t.predicate_class].copy()
    v = qc.relation_fn(v_s, v_o) + qc.lambda_rel * v_r
    return QualityVectors(v_s, v_o, v_r, v)


def top_k_sum(v: np.ndarray, k: int) -> float:
    """Sum of the ``k`` largest entries; at the cut, lower indices are kept first."""
    order = np.argsort(-np.asarray(v, dtype=np.float64), kind="stable")
    return float(np.sum(np.asarray(v)[order[:k]]))


def compute_d(qv: QualityVectors | np.ndarray, qc: QualityConfig) -> int:
    v = qv.v if isinstance(qv, QualityVectors) else np.asarray(qv, dtype=np.float64)
    return int(np.floor(max(top_k_sum(v, qc.k), 1.0)))


@dataclass(frozen=True)
class AugmentedGtSet:
    """``slots[i]`` is the GT for row ``i``; ``origin[i]`` its source index
    (``None`` for no-relation padding); ``d`` the counts after clipping."""

    slots: tuple[GtTriplet, ...]
    origin: tuple[int | None, ...]
    d: tuple[int, ...]


def clip_counts(d: Sequence[int], members: Sequence[int], capacity: int) -> None:
    """In place: lower the largest ``d`` among ``members`` (ties to the lower
    index) until their sum fits ``capacity``."""
    if len(members) > capacity:
        raise CapacityExceededError(
            f"{len(members)} ground truths compete for {capacity} queries"
        )
    while sum(d[g] for g in members) > capacity:
        g = max(members, key=lambda m: (d[m], -m))
        d[g] -= 1


def augment_gt_set(
    gts: Sequence[GtTriplet],
    d: Sequence[int],
    n_q: int,
    pg: PredicateGrouping | None = None,
    qg: QueryGrouping | None = None,
) -> AugmentedGtSet:
    if len(d) != len(gts):
        raise ValueError(f"{len(d)} duplication counts for {len(gts)} ground truths")
    if any(x < 1 for x in d):
        raise ValueError("every duplication count must be >= 1")
    if any(t.is_null for t in gts):
        raise ValueError("pass real ground truths only; padding is added here")
    counts = [int(x) for x in d]
    if qg is None:
        clip_counts(counts, list(range(len(gts))), n_q)
    else:
        if pg is None:
            raise ValueError("query grouping needs the predicate grouping")
        if qg.n_q != n_q:
            raise ValueError(f"query grouping covers {qg.n_q} queries, expected {n_q}")
        groups = gt_groups(gts, pg)
        for g, cap in enumerate(qg.counts, start=1):
            clip_counts(counts, [i for i, gg in enumerate(groups) if gg == g], cap)

    slots: list[GtTriplet] = []
    origin: list[int | None] = []
    for i, (t, c) in enumerate(zip(gts, counts)):
        slots.extend([t] * c)
        origin.extend([i] * c)
    pad = n_q - len(slots)
    slots.extend([NULL_GT] * pad)
    origin.extend([None] * pad)
    return AugmentedGtSet(tuple(slots), tuple(origin), tuple(counts))


def _solve(
    gts: Sequence[GtTriplet],
    batch: PredictionBatch,
    w: CostWeights,
    d: Sequence[int],
    strategy: str,
    pg: PredicateGrouping | None = None,
    qg: QueryGrouping | None = None,
) -> AssignmentResult:
    n_q = len(batch)
    if not gts:
        return AssignmentResult((), (), strategy, 0.0)
    aug = augment_gt_set(gts, d, n_q, pg, qg)
    costs = build_cost_matrix(aug.slots, batch, w, pg, qg)
    sol = hungarian(costs)
    pairs = sorted((g, sol.perm[i]) for i, g in enumerate(aug.origin) if g is not None)
    return AssignmentResult(tuple(pairs), aug.d, strategy, sol.total_cost)


def speaq_assign(
    gts: Sequence[GtTriplet],
    preds: Sequence[Prediction] | PredictionBatch,
    pg: PredicateGrouping | None,
    qg: QueryGrouping | None,
    w: CostWeights = CostWeights(),
    qc: QualityConfig = QualityConfig(),
) -> AssignmentResult:
    """Quality-aware multi-assignment under groupwise specialization.

    Each GT is duplicated ``d_i`` times, where ``d_i`` comes from the top-k
    quality of all predictions against it; copies may only match queries of
    the GT's own group. With ``pg``/``qg`` both ``None`` the group constraint
    is dropped and only the multi-assignment remains.
    """
    batch = _batch(preds)
    d = [compute_d(quality_vectors(t, batch, qc), qc) for t in gts]
    return _solve(gts, batch, w, d, "speaq", pg, qg)


def single_assign(
    gts: Sequence[GtTriplet],
    preds: Sequence[Prediction] | PredictionBatch,
    w: CostWeights = CostWeights(),
) -> AssignmentResult:
    return _solve(gts, _batch(preds), w, [1] * len(gts), "single")


def agnostic_multi_assign(
    gts: Sequence[GtTriplet],
    preds: Sequence[Prediction] | PredictionBatch,
    w: CostWeights = CostWeights(),
    d_const: int = 3,
    pg: PredicateGrouping | None = None,
    qg: QueryGrouping | None = None,
) -> AssignmentResult:
    if d_const < 1:
        raise ValueError(f"d_const must be >= 1, got {d_const}")
    return _solve(gts, _batch(preds), w, [d_const] * len(gts), "agnostic", pg, qg)


def iou_assign(
    gts: Sequence[GtTriplet],
    preds: Sequence[Prediction] | PredictionBatch,
    iou_threshold: float = 0.5,
    w: CostWeights = CostWeights(),
) -> AssignmentResult:
    """Threshold assignment in the style of anchor-based detectors.

    A prediction whose subject and object IoU with a GT both exceed the
    threshold is paired with that GT (the one with the highest min-IoU when
    several qualify). A GT left without predictions then takes its best
    min-IoU prediction among those still unclaimed, in GT order; if none is
    unclaimed it stays unassigned. ``total_cost`` is the summed matching cost
    of the resulting pairs.
    """
    batch = _batch(preds)
    if not gts:
        return AssignmentResult((), (), "iou", 0.0)
    s = np.stack([iou_matrix(t.subject_box.as_array()[None, :], batch.subject_boxes)[0] for t in gts])
    o = np.stack([iou_matrix(t.object_box.as_array()[None, :], batch.object_boxes)[0] for t in gts])
    score = np.minimum(s, o)  # (G, N)
    qualifies = (s > iou_threshold) & (o > iou_threshold)

    owner: dict[int, int] = {}
    for j in range(len(batch)):
        cand = np.flatnonzero(qualifies[:, j])
        if cand.size:
            owner[j] = int(cand[np.argmax(score[cand, j])])
    counts = [0] * len(gts)
    for g in owner.values():
        counts[g] += 1
    for g in range(len(gts)):
        if counts[g]:
            continue
        free = [j for j in range(len(batch)) if j not in owner]
        if not free:
            continue
        j = max(free, key=lambda jj: (score[g, jj], -jj))
        owner[j] = g
        counts[g] = 1

    pairs = sorted((g, j) for j, g in owner.items())
    rows = [match_cost_row(t, batch, w) for t in gts]
    total = float(np.sum([rows[g][j] for g, j in pairs])) if pairs else 0.0
    return AssignmentResult(tuple(pairs), tuple(counts), "iou", total)
