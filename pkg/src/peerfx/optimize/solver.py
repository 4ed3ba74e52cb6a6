"""
Optimal group composition for a new population as a small integer program
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.spaces import TreatmentSpace, cached_space
from ..design.compositions import iter_compositions
from ..utils.error_handling import UndefinedCellError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_ENUMERATION_LIMIT = 1_000_000
# Objectives closer than this (relative) are treated as equal
TIE_TOLERANCE = 1e-12

Composition = Tuple[int, ...]


def unit_values(table: np.ndarray, space: TreatmentSpace) -> np.ndarray:
    """(H, T) value of one attribute-a unit placed in a group of type t.

    The value is table[a, g_t minus a], nan when a is not in g_t.
    """
    values = np.full((space.H, space.T), np.nan)
    for t in range(space.T):
        for a in range(space.H):
            k = space.peer_set_of_group(t, a + 1)
            if k is not None:
                values[a, t] = table[a, k]
    return values


def objective_coefficients(table: np.ndarray, space: TreatmentSpace) -> np.ndarray:
    """Estimated total outcome of one group of each type: sum_a g_t(a) * table[a, g_t - a]"""
    table = np.asarray(table, dtype=float)
    if table.shape != (space.H, space.R):
        raise ValidationError(f"Cell table has shape {table.shape}, expected {(space.H, space.R)}")
    counts = space.group_count_matrix
    # A missing cell estimate (nan) propagates into its group's coefficient
    return np.where(counts > 0, counts * unit_values(table, space), 0.0).sum(axis=0)


def check_new_counts(new_counts: Sequence[int], H: int, K: int) -> Tuple[int, ...]:
    counts = tuple(int(c) for c in new_counts)
    if len(counts) != H:
        raise ValidationError(f"Expected {H} attribute counts, got {len(counts)}")
    if any(c < 0 for c in counts):
        raise ValidationError(f"Attribute counts must be non-negative, got {counts}")
    if sum(counts) == 0 or sum(counts) % (K + 1) != 0:
        raise ValidationError(
            f"Attribute counts {counts} total {sum(counts)}, not a positive multiple of group size {K + 1}")
    return counts


def usable_group_types(counts: Sequence[int], space: TreatmentSpace) -> List[int]:
    """Group types whose attribute needs fit within the counts"""
    return [t for t, g in enumerate(space.group_sets)
            if all(g.count(a + 1) <= counts[a] for a in range(space.H))]


def _require_cells(table: np.ndarray, counts: Sequence[int], space: TreatmentSpace) -> None:
    missing = set()
    for t in usable_group_types(counts, space):
        for a in range(space.H):
            k = space.peer_set_of_group(t, a + 1)
            if k is not None and not np.isfinite(table[a, k]):
                missing.add((a + 1, k + 1))
    if missing:
        cells = sorted(missing)
        raise UndefinedCellError(
            f"Objective needs {len(cells)} cell estimates that are unavailable: {cells}", cells)


@dataclass
class OptimizationResult:
    """Maximizing composition vector of the linear objective"""
    composition: Composition
    objective: float
    method: str                          # 'enumeration' or 'branch_and_bound'
    coefficients: np.ndarray
    feasible_count: Optional[int] = None  # enumeration only
    argmax_set: Tuple[Composition, ...] = field(default_factory=tuple)

    def to_dict(self, group_labels: Sequence[str]) -> Dict[str, Any]:
        return {
            'composition': list(self.composition),
            'composition_by_group_set': {label: count for label, count in zip(group_labels, self.composition)},
            'objective': self.objective,
            'method': self.method,
            'coefficients': self.coefficients.tolist(),
            'feasible_count': self.feasible_count,
            'argmax_set': [list(l) for l in self.argmax_set],
        }


def _tied(values: np.ndarray, best: float) -> np.ndarray:
    return values >= best - TIE_TOLERANCE * max(1.0, abs(best))


class CompositionSolver:
    """Maximizes sum_t coef_t * l_t over feasible l for fixed attribute counts.

    Small feasible sets are enumerated once and scored as a matrix product, so
    repeated solves (fiducial draws) are cheap. Larger ones fall back to
    depth-first branch and bound.
    """

    def __init__(self, counts: Sequence[int], K: int,
                 enumeration_limit: int = DEFAULT_ENUMERATION_LIMIT):
        self.counts = check_new_counts(counts, len(counts), K)
        self.K = K
        self.space = cached_space(len(self.counts), K)
        self.enumeration_limit = enumeration_limit
        feasible = []
        for l in iter_compositions(self.counts, K):
            feasible.append(l)
            if len(feasible) > enumeration_limit:
                break
        if not feasible:
            raise ValidationError(f"No feasible composition for counts {self.counts} and K={K}")
        if len(feasible) > enumeration_limit:
            self.feasible: Optional[np.ndarray] = None
            logger.debug("More than %d feasible compositions; using branch and bound", enumeration_limit)
        else:
            self.feasible = np.array(feasible, dtype=np.int64)
            logger.debug("Enumerating %d feasible compositions", len(feasible))

    @property
    def method(self) -> str:
        return 'enumeration' if self.feasible is not None else 'branch_and_bound'

    def solve_coefficients(self, coefficients: np.ndarray,
                           rng: Optional[np.random.Generator] = None) -> Tuple[Composition, float, Tuple[Composition, ...]]:
        """(maximizer, objective, argmax set).

        Ties go to the lexicographically smallest vector, or to a uniform choice
        when ``rng`` is given.
        """
        if self.feasible is None:
            l, value, argmax_set = branch_and_bound(coefficients, self.counts, self.space)
            if rng is not None and len(argmax_set) > 1:
                l = argmax_set[rng.integers(len(argmax_set))]
                value = float(np.dot(l, coefficients))
            return l, value, argmax_set
        scores = self.feasible @ np.asarray(coefficients, dtype=float)
        best = float(scores.max())
        tied = np.flatnonzero(_tied(scores, best))
        choice = tied[0] if rng is None or len(tied) == 1 else tied[rng.integers(len(tied))]
        argmax_set = tuple(tuple(int(x) for x in self.feasible[i]) for i in tied)
        return tuple(int(x) for x in self.feasible[choice]), float(scores[choice]), argmax_set

    def solve(self, table: np.ndarray) -> OptimizationResult:
        table = np.asarray(table, dtype=float)
        _require_cells(table, self.counts, self.space)
        coefficients = np.nan_to_num(objective_coefficients(table, self.space), nan=0.0)
        l, value, argmax_set = self.solve_coefficients(coefficients)
        return OptimizationResult(
            composition=l,
            objective=value,
            method=self.method,
            coefficients=coefficients,
            feasible_count=None if self.feasible is None else len(self.feasible),
            argmax_set=argmax_set,
        )


def branch_and_bound(coefficients: np.ndarray, counts: Sequence[int],
                     space: TreatmentSpace) -> Tuple[Composition, float, Tuple[Composition, ...]]:
    """Depth-first search over l_1, l_2, ... with a per-unit greedy upper bound.

    Returns (maximizer, objective, argmax set). The bound gives every remaining
    attribute-a unit the best value an a-unit can earn in any group type not yet
    fixed. Leaves are reached in lexicographic order and subtrees are pruned only
    when their bound falls below the best value found, so every tied optimum is
    collected and the maximizer is the lexicographically smallest of them.
    """
    H, T = space.H, space.T
    group_counts = [g.counts for g in space.group_sets]
    per_unit = np.zeros((H, T))
    for t in range(T):
        size = sum(group_counts[t])
        for a in range(H):
            if group_counts[t][a] > 0:
                # Spread the group total evenly over its members for the bound
                per_unit[a, t] = coefficients[t] / size
    # best_suffix[t][a]: max per-unit value over types s >= t containing a
    best_suffix = np.full((T + 1, H), -np.inf)
    for t in range(T - 1, -1, -1):
        candidates = np.where(np.array(group_counts[t]) > 0, per_unit[:, t], -np.inf)
        best_suffix[t] = np.maximum(best_suffix[t + 1], candidates)

    remaining = list(counts)
    current = [0] * T
    leaders: List[Tuple[Composition, float]] = []
    best_value = [-np.inf]
    visited = [0]

    def bound(t: int, partial: float) -> float:
        total = partial
        for a in range(H):
            if remaining[a] > 0:
                if not np.isfinite(best_suffix[t][a]):
                    return -np.inf
                total += remaining[a] * best_suffix[t][a]
        return total

    def margin() -> float:
        return TIE_TOLERANCE * max(1.0, abs(best_value[0]))

    def search(t: int, partial: float) -> None:
        visited[0] += 1
        if t == T:
            if any(remaining):
                return
            if not leaders or partial > best_value[0] + margin():
                leaders[:] = [(tuple(current), partial)]
                best_value[0] = partial
            elif partial >= best_value[0] - margin():
                leaders.append((tuple(current), partial))
                best_value[0] = max(best_value[0], partial)
            return
        limit = bound(t, partial)
        if limit == -np.inf or (leaders and limit < best_value[0] - margin()):
            return
        g = group_counts[t]
        upper = min(remaining[a] // g[a] for a in range(H) if g[a] > 0)
        for value in range(upper + 1):
            current[t] = value
            for a in range(H):
                remaining[a] -= value * g[a]
            search(t + 1, partial + value * coefficients[t])
            for a in range(H):
                remaining[a] += value * g[a]
        current[t] = 0

    search(0, 0.0)
    logger.debug("Branch and bound visited %d nodes", visited[0])
    if not leaders:
        raise ValidationError(f"No feasible composition for counts {tuple(counts)}")
    tied = [(l, value) for l, value in leaders if value >= best_value[0] - margin()]
    return tied[0][0], float(tied[0][1]), tuple(l for l, _ in tied)


def optimal_composition(table: np.ndarray, new_counts: Sequence[int], K: int,
                        enumeration_limit: int = DEFAULT_ENUMERATION_LIMIT) -> OptimizationResult:
    """Composition vector maximizing the estimated total outcome of the new population"""
    return CompositionSolver(new_counts, K, enumeration_limit).solve(table)
