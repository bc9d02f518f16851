"""Seeded synthetic scenes and side-by-side comparison of assignment strategies.

Each scene draws from its own generator, ``np.random.default_rng([seed,
scene_index])`` (a ``SeedSequence`` keyed by both values), so scenes can be
produced in any order or in parallel and still come out identical.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from speaq.cost_model import CostWeights, GtTriplet, Prediction, PredictionBatch, gt_groups, query_groups
from speaq.geometry import BoundingBox, iou_matrix
from speaq.grouping import (
    FrequencyTable,
    PredicateGrouping,
    QueryGrouping,
    group_predicates,
    group_queries,
)
from speaq.strategies import (
    AssignmentResult,
    QualityConfig,
    agnostic_multi_assign,
    iou_assign,
    single_assign,
    speaq_assign,
)

STRATEGIES = ("single", "iou", "agnostic", "speaq")
REPORT_THRESHOLDS = (0.6, 0.7, 0.8)


@dataclass(frozen=True)
class ScenarioConfig:
    n_predicates: int = 50
    n_entity_classes: int = 30
    n_q: int = 100
    n_g: int = 4
    zipf_exponent: float = 1.2
    scenes: int = 200
    gt_per_scene: tuple[int, int] = (1, 8)
    candidates_per_gt: tuple[int, int] = (1, 5)
    box_jitter_sigma: float = 0.02
    class_temperature: float = 0.25
    # Std-dev of Gaussian logit noise before tempering; lets candidates be misclassified.
    class_noise: float = 0.3
    # Probability that a candidate comes from a query of its GT's group.
    specialized_fraction: float = 0.8
    promising_iou_threshold: float = 0.6
    seed: int = 20240617
    quality: QualityConfig = field(default_factory=QualityConfig)
    weights: CostWeights = field(default_factory=CostWeights)
    agnostic_d: int = 3
    iou_threshold: float = 0.5

    def __post_init__(self) -> None:
        for name in ("n_predicates", "n_entity_classes", "n_q", "n_g", "scenes", "agnostic_d"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("gt_per_scene", "candidates_per_gt"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ValueError(f"{name} must be a nonempty range (lo <= hi, lo >= 0)")
            object.__setattr__(self, name, (int(lo), int(hi)))
        if self.zipf_exponent < 0:
            raise ValueError("zipf_exponent must be >= 0")
        if self.class_temperature <= 0:
            raise ValueError("class_temperature must be > 0")
        if self.box_jitter_sigma < 0 or self.class_noise < 0:
            raise ValueError("noise scales must be >= 0")
        if not 0.0 <= self.specialized_fraction <= 1.0:
            raise ValueError("specialized_fraction must lie in [0, 1]")
        if not 0.0 < self.promising_iou_threshold <= 1.0:
            raise ValueError("promising_iou_threshold must lie in (0, 1]")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["gt_per_scene"] = list(self.gt_per_scene)
        out["candidates_per_gt"] = list(self.candidates_per_gt)
        out["quality"]["relation_fn"] = self.quality.relation_fn.value
        return out


@dataclass(frozen=True)
class Groupings:
    freq: FrequencyTable
    predicates: PredicateGrouping
    queries: QueryGrouping


class Scene:
    """Ground truths plus one prediction per query slot.

    Generated scenes hold their predictions column-stacked; ``preds``
    materializes :class:`Prediction` objects on first access.
    """

    def __init__(self, gts: Sequence[GtTriplet], preds: Sequence[Prediction] | PredictionBatch):
        self.gts = list(gts)
        if isinstance(preds, PredictionBatch):
            self.batch: PredictionBatch | None = preds
            self._preds: list[Prediction] | None = None
        else:
            self._preds = list(preds)
            self.batch = PredictionBatch.from_predictions(self._preds) if self._preds else None

    @property
    def preds(self) -> list[Prediction]:
        if self._preds is None:
            self._preds = self.batch.to_predictions() if self.batch is not None else []
        return self._preds


def zipf_proportions(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1, dtype=np.float64) ** exponent
    return w / w.sum()


def scenario_groupings(cfg: ScenarioConfig) -> Groupings:
    freq = FrequencyTable.from_counts(list(zipf_proportions(cfg.n_predicates, cfg.zipf_exponent)))
    pg = group_predicates(freq, cfg.n_g)
    return Groupings(freq, pg, group_queries(pg, cfg.n_q))


def scene_rng(seed: int, scene_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, scene_index])


def _random_boxes(rng: np.random.Generator, n: int) -> np.ndarray:
    centers = rng.uniform(0.0, 1.0, (n, 2))
    sizes = rng.uniform(0.05, 0.5, (n, 2))
    return _normalize_boxes(np.concatenate([centers - sizes / 2, centers + sizes / 2], axis=1))


def _normalize_boxes(raw: np.ndarray) -> np.ndarray:
    """Clip corners to [0, 1] and reorder so min <= max."""
    v = np.clip(raw, 0.0, 1.0)
    return np.stack(
        [
            np.minimum(v[:, 0], v[:, 2]),
            np.minimum(v[:, 1], v[:, 3]),
            np.maximum(v[:, 0], v[:, 2]),
            np.maximum(v[:, 1], v[:, 3]),
        ],
        axis=1,
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def _soft_one_hot(rng: np.random.Generator, target: int, n: int, size: int, cfg: ScenarioConfig) -> np.ndarray:
    logits = np.zeros((n, size))
    logits[:, target] = 1.0
    if cfg.class_noise > 0:
        logits = logits + rng.normal(0.0, cfg.class_noise, (n, size))
    return _softmax(logits / cfg.class_temperature)


def _background_probs(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    # Near-uniform over real classes with about half the mass on no-object.
    logits = rng.normal(0.0, 0.1, (n, size))
    logits[:, -1] += math.log(size - 1)
    return _softmax(logits)


def generate_scene(
    rng: np.random.Generator, cfg: ScenarioConfig, groupings: Groupings | None = None
) -> Scene:
    groupings = groupings or scenario_groupings(cfg)
    n_q = cfg.n_q
    n_ent = cfg.n_entity_classes + 1  # + no-object
    n_pred = cfg.n_predicates + 1
    zipf = zipf_proportions(cfg.n_predicates, cfg.zipf_exponent)

    n_gt = int(rng.integers(cfg.gt_per_scene[0], cfg.gt_per_scene[1] + 1))
    gt_boxes = _random_boxes(rng, 2 * n_gt).reshape(n_gt, 2, 4)
    classes = rng.integers(0, cfg.n_entity_classes, (n_gt, 2))
    predicates = rng.choice(cfg.n_predicates, size=n_gt, p=zipf)
    gts = [
        GtTriplet(
            subject_box=BoundingBox.from_seq(gt_boxes[i, 0]),
            object_box=BoundingBox.from_seq(gt_boxes[i, 1]),
            subject_class=int(classes[i, 0]),
            object_class=int(classes[i, 1]),
            predicate_class=int(predicates[i]),
        )
        for i in range(n_gt)
    ]

    s_boxes = np.empty((n_q, 4))
    o_boxes = np.empty((n_q, 4))
    s_probs = np.empty((n_q, n_ent))
    o_probs = np.empty((n_q, n_ent))
    p_probs = np.empty((n_q, n_pred))

    group_of_query = np.array(groupings.queries.group_of_each())
    free = np.ones(n_q, dtype=bool)
    for i, g in enumerate(gt_groups(gts, groupings.predicates)):
        n_cand = int(rng.integers(cfg.candidates_per_gt[0], cfg.candidates_per_gt[1] + 1))
        slots = []
        for _ in range(n_cand):
            in_group = free & (group_of_query == g)
            pool = in_group if (rng.random() < cfg.specialized_fraction and in_group.any()) else free
            if not pool.any():
                break
            slot = int(rng.choice(np.flatnonzero(pool)))
            free[slot] = False
            slots.append(slot)
        if not slots:
            continue
        m = len(slots)
        for boxes, gt_box in ((s_boxes, gt_boxes[i, 0]), (o_boxes, gt_boxes[i, 1])):
            noise = rng.normal(0.0, cfg.box_jitter_sigma, (m, 4)) if cfg.box_jitter_sigma > 0 else 0.0
            boxes[slots] = _normalize_boxes(gt_box[None, :] + noise)
        s_probs[slots] = _soft_one_hot(rng, gts[i].subject_class, m, n_ent, cfg)
        o_probs[slots] = _soft_one_hot(rng, gts[i].object_class, m, n_ent, cfg)
        p_probs[slots] = _soft_one_hot(rng, gts[i].predicate_class, m, n_pred, cfg)

    bg = np.flatnonzero(free)
    s_boxes[bg] = _random_boxes(rng, bg.size)
    o_boxes[bg] = _random_boxes(rng, bg.size)
    s_probs[bg] = _background_probs(rng, bg.size, n_ent)
    o_probs[bg] = _background_probs(rng, bg.size, n_ent)
    p_probs[bg] = _background_probs(rng, bg.size, n_pred)

    batch = PredictionBatch(
        subject_boxes=s_boxes,
        object_boxes=o_boxes,
        subject_probs=s_probs,
        object_probs=o_probs,
        predicate_probs=p_probs,
        query_index=np.arange(1, n_q + 1),
    )
    return Scene(gts, batch)


def promising_predictions(
    gts: Sequence[GtTriplet], preds: Sequence[Prediction] | PredictionBatch, iou_t: float
) -> np.ndarray:
    """Positions of predictions whose argmax subject, object and predicate
    classes all match some GT whose subject and object IoU with the
    prediction both exceed ``iou_t``."""
    batch = preds if isinstance(preds, PredictionBatch) else PredictionBatch.from_predictions(preds)
    hit = np.zeros(len(batch), dtype=bool)
    s_arg = batch.subject_probs.argmax(axis=1)
    o_arg = batch.object_probs.argmax(axis=1)
    p_arg = batch.predicate_probs.argmax(axis=1)
    for t in gts:
        s_iou = iou_matrix(t.subject_box.as_array()[None, :], batch.subject_boxes)[0]
        o_iou = iou_matrix(t.object_box.as_array()[None, :], batch.object_boxes)[0]
        hit |= (
            (s_arg == t.subject_class)
            & (o_arg == t.object_class)
            & (p_arg == t.predicate_class)
            & (s_iou > iou_t)
            & (o_iou > iou_t)
        )
    return np.flatnonzero(hit)


def suppressed_promising_ratio(
    gts: Sequence[GtTriplet],
    preds: Sequence[Prediction] | PredictionBatch,
    result: AssignmentResult,
    iou_t: float = 0.6,
) -> float:
    """Share of promising predictions left without a GT (trained toward
    no-relation); 0 when nothing is promising."""
    promising = promising_predictions(gts, preds, iou_t)
    if promising.size == 0:
        return 0.0
    assigned = result.assigned_predictions()
    missed = sum(1 for j in promising if int(j) not in assigned)
    return missed / promising.size


def run_strategy(
    name: str, scene: Scene, cfg: ScenarioConfig, groupings: Groupings,
    batch: PredictionBatch | None = None,
) -> AssignmentResult:
    gts = scene.gts
    batch = batch or scene.batch
    if name == "single":
        return single_assign(gts, batch, cfg.weights)
    if name == "iou":
        return iou_assign(gts, batch, cfg.iou_threshold, cfg.weights)
    if name == "agnostic":
        return agnostic_multi_assign(gts, batch, cfg.weights, cfg.agnostic_d)
    if name == "speaq":
        return speaq_assign(gts, batch, groupings.predicates, groupings.queries, cfg.weights, cfg.quality)
    raise ValueError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")


@dataclass(frozen=True)
class SceneMetrics:
    suppressed: dict[float, float]
    d: tuple[int, ...]
    cross_tab: np.ndarray  # (n_g, n_g) raw pair counts, [gt group, query group]
    n_pairs: int


def scene_metrics(
    scene: Scene, batch: PredictionBatch, result: AssignmentResult, groupings: Groupings,
    thresholds: Sequence[float],
) -> SceneMetrics:
    n_g = groupings.predicates.n_groups
    cross = np.zeros((n_g, n_g), dtype=np.int64)
    if result.pairs:
        g_rows = gt_groups(scene.gts, groupings.predicates)
        g_cols = query_groups(batch, groupings.queries)
        for g, j in result.pairs:
            cross[g_rows[g] - 1, g_cols[j] - 1] += 1
    return SceneMetrics(
        suppressed={t: suppressed_promising_ratio(scene.gts, batch, result, t) for t in thresholds},
        d=result.d,
        cross_tab=cross,
        n_pairs=len(result.pairs),
    )


def _mean(values: Sequence[float]) -> float | None:
    return math.fsum(values) / len(values) if values else None


@dataclass
class StrategyReport:
    suppressed_promising_ratio: dict[str, float]
    avg_d: float | None
    per_group_cross_tab: list[list[float]]
    avg_gts_per_query: float
    prediction_frequency_per_group: list[float]

    @classmethod
    def aggregate(cls, per_scene: Sequence[SceneMetrics], qg: QueryGrouping) -> "StrategyReport":
        thresholds = sorted(per_scene[0].suppressed) if per_scene else []
        sup = {f"{t:g}": _mean([m.suppressed[t] for m in per_scene]) or 0.0 for t in thresholds}
        avg_d = _mean([sum(m.d) / len(m.d) for m in per_scene if m.d])
        n_g = qg.n_groups
        cap = np.array(qg.counts, dtype=np.float64)
        cross = []
        for i in range(n_g):
            row = []
            for j in range(n_g):
                vals = [m.cross_tab[i, j] / cap[j] if cap[j] else 0.0 for m in per_scene]
                row.append(_mean(vals) or 0.0)
            cross.append(row)
        per_query = _mean([m.n_pairs / qg.n_q for m in per_scene]) or 0.0
        shares = []
        for i in range(n_g):
            vals = [m.cross_tab[i].sum() / m.n_pairs for m in per_scene if m.n_pairs]
            shares.append(_mean(vals) or 0.0)
        return cls(sup, avg_d, cross, per_query, shares)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SimulationReport:
    config: dict
    seed: int
    scenes: int
    predicate_groups: list[list[int]]
    gt_frequency_per_group: list[float]
    query_counts: list[int]
    strategies: dict[str, StrategyReport]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["strategies"] = {k: v.to_dict() for k, v in self.strategies.items()}
        return out


def _run_scene(
    index: int, cfg: ScenarioConfig, strategies: Sequence[str], groupings: Groupings
) -> dict[str, SceneMetrics]:
    scene = generate_scene(scene_rng(cfg.seed, index), cfg, groupings)
    batch = scene.batch
    thresholds = sorted(set(REPORT_THRESHOLDS) | {cfg.promising_iou_threshold})
    return {
        name: scene_metrics(scene, batch, run_strategy(name, scene, cfg, groupings, batch), groupings, thresholds)
        for name in strategies
    }


def run_comparison(
    cfg: ScenarioConfig,
    strategies: Sequence[str] = STRATEGIES,
    workers: int = 1,
    scene_indices: Sequence[int] | None = None,
) -> SimulationReport:
    """Run every strategy on the same scenes and average metrics over scenes.

    ``scene_indices`` defaults to ``range(cfg.scenes)``; any permutation of it
    yields the same report.
    """
    if not strategies:
        raise ValueError("at least one strategy is required")
    for name in strategies:
        if name not in STRATEGIES:
            raise ValueError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
    groupings = scenario_groupings(cfg)
    indices = list(range(cfg.scenes)) if scene_indices is None else list(scene_indices)

    def work(i: int) -> dict[str, SceneMetrics]:
        return _run_scene(i, cfg, strategies, groupings)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, indices))
    else:
        results = [work(i) for i in indices]

    # Reduce in scene-index order regardless of how work was scheduled.
    ordered = [r for _, r in sorted(zip(indices, results), key=lambda x: x[0])]
    reports = {
        name: StrategyReport.aggregate([r[name] for r in ordered], groupings.queries)
        for name in strategies
    }
    return SimulationReport(
        config=cfg.to_dict(),
        seed=cfg.seed,
        scenes=len(indices),
        predicate_groups=[list(g) for g in groupings.predicates.groups],
        gt_frequency_per_group=list(groupings.predicates.group_freq),
        query_counts=list(groupings.queries.counts),
        strategies=reports,
    )
