"""Small builders for hand-made triplets and predictions."""

from __future__ import annotations

import numpy as np

from speaq.cost_model import GtTriplet, Prediction
from speaq.geometry import BoundingBox


def box(*coords: float) -> BoundingBox:
    return BoundingBox(*coords)


def one_hot(index: int, size: int) -> np.ndarray:
    v = np.zeros(size)
    v[index] = 1.0
    return v


def uniform(size: int) -> np.ndarray:
    return np.full(size, 1.0 / size)


def gt(s_box, o_box, s_cls=0, o_cls=0, p_cls=0) -> GtTriplet:
    return GtTriplet(
        subject_box=s_box if isinstance(s_box, BoundingBox) else BoundingBox(*s_box),
        object_box=o_box if isinstance(o_box, BoundingBox) else BoundingBox(*o_box),
        subject_class=s_cls,
        object_class=o_cls,
        predicate_class=p_cls,
    )


def pred(
    s_box, o_box, s_probs, o_probs, p_probs, query_index: int = 1
) -> Prediction:
    return Prediction(
        subject_box=s_box if isinstance(s_box, BoundingBox) else BoundingBox(*s_box),
        object_box=o_box if isinstance(o_box, BoundingBox) else BoundingBox(*o_box),
        subject_probs=s_probs,
        object_probs=o_probs,
        predicate_probs=p_probs,
        query_index=query_index,
    )


def copy_of(t: GtTriplet, query_index: int, n_ent: int = 4, n_pred: int = 4) -> Prediction:
    """A prediction reproducing ``t`` exactly with one-hot class scores."""
    return pred(
        t.subject_box,
        t.object_box,
        one_hot(t.subject_class, n_ent),
        one_hot(t.object_class, n_ent),
        one_hot(t.predicate_class, n_pred),
        query_index,
    )


def background(query_index: int, n_ent: int = 4, n_pred: int = 4, corner: float = 0.9) -> Prediction:
    """A small box in a corner with no-object-only class scores."""
    b = (corner, corner, 1.0, 1.0)
    return pred(b, b, one_hot(n_ent - 1, n_ent), one_hot(n_ent - 1, n_ent), one_hot(n_pred - 1, n_pred), query_index)
