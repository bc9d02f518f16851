"""Self-check harness: solver vs. brute-force oracle, and the group constraint
of specialized assignment on random scenes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from speaq.assignment import Assignment, brute_force_assignment, hungarian, is_bijection
from speaq.cost_model import gt_groups, query_groups
from speaq.errors import EmptyGroupError, InfeasibleError
from speaq.simulator import ScenarioConfig, generate_scene, scenario_groupings, scene_rng
from speaq.strategies import speaq_assign

Solver = Callable[[np.ndarray], Assignment]


def random_grid_matrix(
    rng: np.random.Generator, n: int, forbid_p: float = 0.15, zero_row_p: float = 0.25
) -> np.ndarray:
    """Half-integer costs in [-10, 10] with sprinkled FORBIDDEN entries and
    all-zero rows, the shapes grouped and padded cost matrices take."""
    c = rng.integers(-20, 21, (n, n)) / 2.0
    c[rng.random((n, n)) < forbid_p] = math.inf
    c[rng.random(n) < zero_row_p] = 0.0
    return c


@dataclass
class VerificationSummary:
    oracle_trials: int = 0
    oracle_failures: list[str] = field(default_factory=list)
    group_trials: int = 0
    group_pairs: int = 0
    group_violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.oracle_failures and not self.group_violations


def _outcome(solver: Solver, c: np.ndarray):
    try:
        return solver(c)
    except InfeasibleError:
        return None


def check_oracle(
    n_trials: int = 1000, max_n: int = 7, seed: int = 0, solver: Solver = hungarian
) -> tuple[int, list[str]]:
    rng = np.random.default_rng(seed)
    failures: list[str] = []
    for trial in range(n_trials):
        n = int(rng.integers(1, max_n + 1))
        c = random_grid_matrix(rng, n)
        got, want = _outcome(solver, c), _outcome(brute_force_assignment, c)
        if (got is None) != (want is None):
            failures.append(f"trial {trial}: feasibility disagrees (solver={got}, oracle={want})")
            continue
        if got is None:
            continue
        if not is_bijection(got.perm, n):
            failures.append(f"trial {trial}: not a bijection: {got.perm}")
        elif not all(math.isfinite(c[i, j]) for i, j in enumerate(got.perm)):
            failures.append(f"trial {trial}: forbidden entry selected")
        elif got.total_cost != want.total_cost:
            failures.append(f"trial {trial}: cost {got.total_cost} != oracle {want.total_cost}")
        elif got.total_cost != math.fsum(c[i, j] for i, j in enumerate(got.perm)):
            failures.append(f"trial {trial}: reported cost differs from selected entries")
    return n_trials, failures


def check_group_constraint(n_trials: int = 200, seed: int = 0) -> tuple[int, int, list[str]]:
    """Random scenes with random N_g in [1, 6]; every pair must join a GT to a
    query of the same group. Returns (trials, pairs checked, violations)."""
    rng = np.random.default_rng([seed, 1])
    violations: list[str] = []
    pairs_checked = 0
    for trial in range(n_trials):
        n_g = int(rng.integers(1, 7))
        while True:
            # Resample until the tail populates n_g groups and every query
            # group can hold a full scene's GTs.
            cfg = ScenarioConfig(
                n_predicates=int(rng.integers(40, 151)),
                n_q=int(rng.integers(20, 201)),
                n_g=n_g,
                zipf_exponent=float(rng.uniform(0.6, 1.3)),
                gt_per_scene=(0, 5),
                candidates_per_gt=(0, 4),
                specialized_fraction=float(rng.uniform(0.0, 1.0)),
                seed=int(rng.integers(2**31)),
            )
            try:
                groupings = scenario_groupings(cfg)
            except EmptyGroupError:
                continue
            if min(groupings.queries.counts) >= cfg.gt_per_scene[1]:
                break
        scene = generate_scene(scene_rng(cfg.seed, trial), cfg, groupings)
        batch = scene.batch
        result = speaq_assign(scene.gts, batch, groupings.predicates, groupings.queries, cfg.weights, cfg.quality)
        g_rows = gt_groups(scene.gts, groupings.predicates)
        g_cols = query_groups(batch, groupings.queries)
        for g, j in result.pairs:
            pairs_checked += 1
            if g_rows[g] != g_cols[j]:
                violations.append(f"trial {trial}: GT {g} (group {g_rows[g]}) -> query {j + 1} (group {g_cols[j]})")
    return n_trials, pairs_checked, violations


def run_verification(
    n_trials: int = 1000, max_n: int = 7, seed: int = 0, solver: Solver = hungarian,
    group_trials: int = 200,
) -> VerificationSummary:
    summary = VerificationSummary()
    summary.oracle_trials, summary.oracle_failures = check_oracle(n_trials, max_n, seed, solver)
    summary.group_trials, summary.group_pairs, summary.group_violations = check_group_constraint(
        group_trials, seed
    )
    return summary
