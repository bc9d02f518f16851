"""Groupwise query specialization and quality-aware multi-assignment for
set-prediction label assignment."""

from speaq.assignment import FORBIDDEN, Assignment, brute_force_assignment, hungarian
from speaq.cost_model import (
    CostWeights,
    GtTriplet,
    LossWeights,
    Prediction,
    build_cost_matrix,
    entity_cost,
    match_cost,
    total_loss,
)
from speaq.geometry import BoundingBox, giou, iou, l1_box_distance
from speaq.grouping import (
    FrequencyTable,
    PredicateGrouping,
    QueryGrouping,
    group_predicates,
    group_queries,
    grouping_cost,
    predicate_group_of,
    query_group_of,
)
from speaq.strategies import (
    AssignmentResult,
    QualityConfig,
    QualityVectors,
    RelationFn,
    agnostic_multi_assign,
    augment_gt_set,
    compute_d,
    iou_assign,
    quality_vectors,
    single_assign,
    speaq_assign,
)

__version__ = "0.1.0"
