"""Frequency-based predicate grouping, proportional query grouping, and the
0/forbidden group-compatibility cost.

Group ids are 1-based (group 1 holds the most frequent predicates) and query
indices are 1-based, matching ``Prediction.query_index``. Threshold and floor
decisions are made on exact rationals so they never hinge on float rounding.
"""

from __future__ import annotations

import math
from functools import cached_property
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from speaq.assignment import FORBIDDEN
from speaq.errors import EmptyGroupError, UnknownIdError


@dataclass(frozen=True)
class FrequencyTable:
    """Per-predicate sample counts; insertion order is preserved."""

    counts: dict[int, float]

    def __post_init__(self) -> None:
        for pid, c in self.counts.items():
            if c < 0 or not math.isfinite(c):
                raise ValueError(f"count for predicate {pid} must be finite and >= 0, got {c}")
        if self.total <= 0:
            raise ValueError("frequency table total must be > 0")

    @classmethod
    def from_counts(cls, counts: Mapping[int, float] | list[float]) -> "FrequencyTable":
        if isinstance(counts, Mapping):
            return cls({int(k): v for k, v in counts.items()})
        return cls({i: v for i, v in enumerate(counts)})

    @property
    def total(self) -> float:
        return math.fsum(self.counts.values())

    @cached_property
    def _scaled(self) -> tuple[dict[int, int], int]:
        # Counts are ints or binary floats, so one power-of-two scale makes
        # every count an exact integer.
        ratios = {pid: float(c).as_integer_ratio() if isinstance(c, float) else (int(c), 1)
                  for pid, c in self.counts.items()}
        scale = max(den for _, den in ratios.values())
        ints = {pid: num * (scale // den) for pid, (num, den) in ratios.items()}
        return ints, sum(ints.values())

    def scaled_counts(self) -> tuple[dict[int, int], int]:
        """Integer counts proportional to the table, and their total."""
        return self._scaled

    def proportion(self, pid: int) -> float:
        ints, total = self._scaled
        return ints[pid] / total

    def proportions(self) -> dict[int, float]:
        ints, total = self._scaled
        return {pid: c / total for pid, c in ints.items()}

    def sorted_ids(self) -> list[int]:
        """Predicate ids by descending count, ties by ascending id."""
        # Float comparison is exact, so no rational conversion is needed here.
        return sorted(self.counts, key=lambda pid: (-self.counts[pid], pid))


@dataclass(frozen=True)
class PredicateGrouping:
    groups: tuple[tuple[int, ...], ...]
    group_freq: tuple[float, ...]
    # Exact group shares when built from counts; floats are used otherwise.
    shares: tuple[Fraction, ...] | None = field(default=None, compare=False, repr=False)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def mapping(self) -> dict[int, int]:
        return {pid: g for g, members in enumerate(self.groups, start=1) for pid in members}


@dataclass(frozen=True)
class QueryGrouping:
    counts: tuple[int, ...]

    @property
    def n_groups(self) -> int:
        return len(self.counts)

    @property
    def n_q(self) -> int:
        return sum(self.counts)

    @property
    def offsets(self) -> tuple[int, ...]:
        """0-based start of each group; group k spans query indices
        ``offsets[k-1] + 1 .. offsets[k-1] + counts[k-1]``."""
        out, acc = [], 0
        for c in self.counts:
            out.append(acc)
            acc += c
        return tuple(out)

    def ranges(self) -> list[tuple[int, int]]:
        """Inclusive 1-based ``(first, last)`` query indices per group; empty groups give ``(first, first-1)``."""
        return [(o + 1, o + c) for o, c in zip(self.offsets, self.counts)]

    def group_of_each(self) -> list[int]:
        """Group id for query indices 1..n_q, as a list indexed from 0."""
        return [g for g, c in enumerate(self.counts, start=1) for _ in range(c)]


def group_predicates(freq: FrequencyTable, n_g: int) -> PredicateGrouping:
    if n_g < 1:
        raise ValueError(f"n_g must be >= 1, got {n_g}")
    order = freq.sorted_ids()
    if len(order) < n_g:
        raise EmptyGroupError(f"{len(order)} predicates cannot fill {n_g} groups")

    ints, total = freq.scaled_counts()
    groups: list[list[int]] = [[]]
    sums: list[int] = [0]
    for pid in order:
        i = len(groups)
        # running share <= (1/2)**i, compared on exact integers
        if i == n_g or sums[-1] * 2**i <= total:
            groups[-1].append(pid)
            sums[-1] += ints[pid]
        else:
            groups.append([pid])
            sums.append(ints[pid])

    if len(groups) < n_g:
        raise EmptyGroupError(
            f"distribution populates only {len(groups)} of {n_g} groups; lower n_g"
        )
    return PredicateGrouping(
        groups=tuple(tuple(g) for g in groups),
        group_freq=tuple(c / total for c in sums),
        shares=tuple(Fraction(c, total) for c in sums),
    )


def _exact_shares(pg: PredicateGrouping) -> list[Fraction]:
    if pg.shares is not None:
        return list(pg.shares)
    # Hand-built groupings carry decimal floats such as 0.3; recover the
    # intended rational instead of flooring against 0.29999...
    return [Fraction(f).limit_denominator(10**9) for f in pg.group_freq]


def group_queries(pg: PredicateGrouping, n_q: int) -> QueryGrouping:
    """Proportional query counts: ``floor(n_q * f_g)`` for all but the last
    group, which takes the remainder."""
    if n_q < pg.n_groups:
        raise ValueError(f"n_q={n_q} smaller than number of groups {pg.n_groups}")
    shares = _exact_shares(pg)
    counts = [math.floor(n_q * s) for s in shares[:-1]]
    counts.append(n_q - sum(counts))
    if counts[-1] < 0:
        raise ValueError("group frequencies sum above 1")
    return QueryGrouping(tuple(counts))


def predicate_group_of(pg: PredicateGrouping, predicate_id: int) -> int:
    for g, members in enumerate(pg.groups, start=1):
        if predicate_id in members:
            return g
    raise UnknownIdError(f"predicate {predicate_id} is in no group")


def query_group_of(qg: QueryGrouping, query_index: int) -> int:
    if not 1 <= query_index <= qg.n_q:
        raise UnknownIdError(f"query index {query_index} outside 1..{qg.n_q}")
    for g, (first, last) in enumerate(qg.ranges(), start=1):
        if first <= query_index <= last:
            return g
    raise AssertionError("unreachable: ranges cover 1..n_q")


def grouping_cost(gt_group: int | None, query_group: int) -> float:
    """0 when the groups agree or the GT is no-relation (``None``), else FORBIDDEN."""
    if gt_group is None or gt_group == query_group:
        return 0.0
    return FORBIDDEN
