"""Exact minimum-cost bijections on square cost matrices.

A cost matrix is a square ``float64`` array; ``FORBIDDEN`` (``+inf``) marks
pairs that may not be selected. :func:`hungarian` is the production solver,
:func:`brute_force_assignment` an exhaustive oracle for small ``n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from speaq.errors import InfeasibleError, SizeExceededError

FORBIDDEN = math.inf
BRUTE_FORCE_MAX_N = 8


@dataclass(frozen=True)
class Assignment:
    """``perm[i]`` is the column (prediction) selected for row (GT slot) ``i``."""

    perm: tuple[int, ...]
    total_cost: float

    @property
    def n(self) -> int:
        return len(self.perm)


def as_cost_matrix(costs) -> np.ndarray:
    arr = np.asarray(costs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise ValueError(f"cost matrix must be non-empty and square, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise ValueError("cost matrix contains NaN")
    if np.isneginf(arr).any():
        raise ValueError("cost matrix contains -inf")
    return arr


def forbidden_sentinel(costs: np.ndarray) -> float:
    """A finite stand-in for FORBIDDEN that no feasible optimum can beat.

    Any bijection using one sentinel costs at least ``S - (n-1)*M`` where
    ``M`` bounds |finite entries|, and every feasible bijection costs at most
    ``n*M``; ``S = 2*n*M + 1`` separates the two.
    """
    finite = costs[np.isfinite(costs)]
    max_abs = float(np.abs(finite).max()) if finite.size else 0.0
    return 2.0 * costs.shape[0] * max_abs + 1.0


def _total(costs: np.ndarray, perm) -> float:
    return math.fsum(float(costs[i, j]) for i, j in enumerate(perm))


def _solve_rows(a: np.ndarray) -> np.ndarray:
    """Shortest augmenting path assignment of the ``m`` rows of ``a`` (m <= n)
    to distinct columns. Returns the column index per row."""
    m, n = a.shape
    u = np.zeros(m + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: 1-based row owning column j, 0 = free
    way = np.zeros(n + 1, dtype=np.int64)
    # Column 0 is the virtual root of every search tree.
    padded = np.zeros((m + 1, n + 1))
    padded[1:, 1:] = a

    for i in range(1, m + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = padded[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    cols = np.empty(m, dtype=np.int64)
    for j in range(1, n + 1):
        if p[j]:
            cols[p[j] - 1] = j - 1
    return cols


def hungarian(costs) -> Assignment:
    """Minimum-cost bijection avoiding FORBIDDEN entries.

    Rows that hold one finite value in every column (the zero rows of padded
    no-relation slots, typically) contribute the same cost wherever they go,
    so they are set aside, the remaining rows are solved against all columns,
    and the set-aside rows take the leftover columns in ascending order.

    Raises :class:`InfeasibleError` if every bijection uses a FORBIDDEN entry.
    """
    c = as_cost_matrix(costs)
    n = c.shape[0]
    constant = np.isfinite(c).all(axis=1) & (c == c[:, :1]).all(axis=1)
    active = np.flatnonzero(~constant)

    perm = np.full(n, -1, dtype=np.int64)
    if active.size:
        work = c[active]
        work = np.where(np.isfinite(work), work, forbidden_sentinel(c))
        perm[active] = _solve_rows(work)
    taken = np.zeros(n, dtype=bool)
    taken[perm[active]] = True
    perm[np.flatnonzero(constant)] = np.flatnonzero(~taken)

    if not np.isfinite(c[np.arange(n), perm]).all():
        raise InfeasibleError("no bijection avoids all forbidden entries")
    perm_t = tuple(int(j) for j in perm)
    return Assignment(perm_t, _total(c, perm_t))


def brute_force_assignment(costs) -> Assignment:
    """Enumerate all n! bijections; the first minimum in lexicographic order wins."""
    c = as_cost_matrix(costs)
    n = c.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise SizeExceededError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    rows = c.tolist()
    best: tuple[int, ...] | None = None
    best_cost = math.inf
    for perm in itertools.permutations(range(n)):
        total = math.fsum(rows[i][j] for i, j in enumerate(perm))
        if total < best_cost:
            best, best_cost = perm, total
    if best is None:
        raise InfeasibleError("no bijection avoids all forbidden entries")
    return Assignment(best, best_cost)


def is_bijection(perm, n: int) -> bool:
    return len(perm) == n and sorted(perm) == list(range(n))
