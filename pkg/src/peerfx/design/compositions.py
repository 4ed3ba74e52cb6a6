"""
Feasible group-composition vectors
"""

import logging
from typing import Iterator, List, Optional, Sequence, Tuple

from ..core.spaces import TreatmentSpace
from ..models.population import Population
from ..utils.error_handling import ValidationError

logger = logging.getLogger(__name__)


def iter_compositions(counts: Sequence[int], K: int) -> Iterator[Tuple[int, ...]]:
    """Yield every l >= 0 with sum_t g_t(a) l_t == counts[a] for all a.

    Vectors come out in ascending lexicographic order. A branch is cut as soon
    as some attribute still has units left but no remaining group set contains it.
    """
    H = len(counts)
    if any(c < 0 for c in counts):
        raise ValidationError(f"Attribute counts must be non-negative, got {tuple(counts)}")
    if sum(counts) == 0 or sum(counts) % (K + 1) != 0:
        return
    space = TreatmentSpace(H, K)
    groups = [g.counts for g in space.group_sets]
    T = space.T

    # suffix_has[t][a]: some g_s with s >= t contains attribute a
    suffix_has = [[False] * H for _ in range(T + 1)]
    for t in range(T - 1, -1, -1):
        suffix_has[t] = [suffix_has[t + 1][a] or groups[t][a] > 0 for a in range(H)]

    remaining = list(counts)
    current = [0] * T

    def search(t: int) -> Iterator[Tuple[int, ...]]:
        if t == T:
            if not any(remaining):
                yield tuple(current)
            return
        if any(remaining[a] > 0 and not suffix_has[t][a] for a in range(H)):
            return
        g = groups[t]
        upper = min(remaining[a] // g[a] for a in range(H) if g[a] > 0)
        for value in range(0, upper + 1):
            current[t] = value
            for a in range(H):
                remaining[a] -= value * g[a]
            yield from search(t + 1)
            for a in range(H):
                remaining[a] += value * g[a]
        current[t] = 0

    yield from search(0)


def feasible_compositions(population: Population, new_counts: Optional[Sequence[int]] = None,
                          limit: Optional[int] = None) -> List[Tuple[int, ...]]:
    """All feasible composition vectors for the population (or for new attribute counts).

    Returns an empty list when the total is not a multiple of K+1. With ``limit``,
    enumeration stops after limit+1 vectors so callers can detect overflow cheaply.
    """
    counts = tuple(population.counts if new_counts is None else new_counts)
    if len(counts) != population.H:
        raise ValidationError(f"Expected {population.H} attribute counts, got {len(counts)}")
    result: List[Tuple[int, ...]] = []
    for l in iter_compositions(counts, population.K):
        result.append(l)
        if limit is not None and len(result) > limit:
            break
    logger.debug("Enumerated %d feasible compositions for counts %s", len(result), counts)
    return result


def is_feasible(composition: Sequence[int], counts: Sequence[int], K: int) -> bool:
    """Check sum_t g_t(a) l_t == n_[a] for each a, with l_t non-negative integers"""
    space = TreatmentSpace(len(counts), K)
    if len(composition) != space.T or any(x < 0 for x in composition):
        return False
    for a in range(1, space.H + 1):
        if sum(g.count(a) * l_t for g, l_t in zip(space.group_sets, composition)) != counts[a - 1]:
            return False
    return True


def require_feasible(composition: Sequence[int], population: Population) -> None:
    space = TreatmentSpace.for_population(population)
    if len(composition) != space.T:
        raise ValidationError(
            f"Composition vector has length {len(composition)}, expected T={space.T}")
    if not is_feasible(composition, population.counts, population.K):
        raise ValidationError(
            f"Composition {tuple(composition)} is infeasible for attribute counts {population.counts}")
