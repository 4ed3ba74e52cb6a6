"""
Assignment probability kernels for random partitioning and complete randomization

For two distinct units i, j with attributes a, a' the kernel holds
pi1[a, r] = pr(R_i = r) and pi2[a, a', r, r'] = pr(R_i = r, R_j = r'), plus the
derived constants d, c and b used by the variance formulas. Probabilities are
computed as exact rationals and converted to floats once.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.spaces import TreatmentSpace, cached_space, n_ar_matrix
from ..models.design import Design, DesignKind
from ..models.population import AttrMultiset, Population
from .compositions import require_feasible

logger = logging.getLogger(__name__)

# (pi1, pi2) as nested lists of Fractions; pi2 entries are None when no such unit pair exists
ExactProbabilities = Tuple[List[List[Fraction]], List[List[List[List[Optional[Fraction]]]]]]


def _binom(n: int, k: int) -> int:
    """Binomial coefficient that is zero outside 0 <= k <= n"""
    if n < 0 or k < 0 or k > n:
        return 0
    return math.comb(n, k)


def _ways(pool: Sequence[int], take: AttrMultiset) -> int:
    """Ways to draw the attribute multiset ``take`` from units with attribute counts ``pool``"""
    return math.prod(_binom(pool[q], take.counts[q]) for q in range(len(pool)))


def _ways_two(pool: Sequence[int], first: AttrMultiset, second: AttrMultiset) -> int:
    """Ways to draw ``first`` and then, disjointly, ``second`` from ``pool``"""
    return math.prod(
        _binom(pool[q], first.counts[q]) * _binom(pool[q] - first.counts[q], second.counts[q])
        for q in range(len(pool))
    )


def _random_partition_probabilities(counts: Tuple[int, ...], K: int,
                                    space: TreatmentSpace) -> ExactProbabilities:
    H, R = space.H, space.R
    n = sum(counts)
    m = n // (K + 1)
    peers = space.peer_sets

    # A unit's K peers are a uniform K-subset of the other n-1 units
    pi1 = []
    for a in range(1, H + 1):
        pool = list(counts)
        pool[a - 1] -= 1
        pi1.append([Fraction(_ways(pool, r), _binom(n - 1, K)) for r in peers])

    same_group = Fraction(K, n - 1)
    other_group = 1 - same_group
    psi_total = _binom(n - 2, K - 1)
    phi_total = _binom(n - 2, K) * _binom(n - 2 - K, K) if m > 1 else 0

    pi2: List[List[List[List[Optional[Fraction]]]]] = []
    for a in range(1, H + 1):
        row_a = []
        for a2 in range(1, H + 1):
            if a == a2 and counts[a - 1] < 2:
                row_a.append([[None] * R for _ in range(R)])
                continue
            pool = list(counts)
            pool[a - 1] -= 1
            pool[a2 - 1] -= 1
            block = []
            for r in peers:
                # i and j share a group: the other K-1 members are r minus one copy of a2
                shared = r.remove(a2)
                row = []
                for r2 in peers:
                    psi = Fraction(0)
                    if shared is not None and r2.remove(a) == shared:
                        psi = Fraction(_ways(pool, shared), psi_total)
                    phi = Fraction(_ways_two(pool, r, r2), phi_total) if phi_total else Fraction(0)
                    row.append(same_group * psi + other_group * phi)
                block.append(row)
            row_a.append(block)
        pi2.append(row_a)
    return pi1, pi2


def _complete_randomization_probabilities(counts: Tuple[int, ...], composition: Sequence[int],
                                          space: TreatmentSpace) -> ExactProbabilities:
    # Within each attribute stratum the treatments are a completely randomized
    # experiment with n_[a]r units on r, independent across strata
    H, R = space.H, space.R
    n_ar = n_ar_matrix(composition, space)
    pi1 = [[Fraction(int(n_ar[a, k]), counts[a]) for k in range(R)] for a in range(H)]

    pi2: List[List[List[List[Optional[Fraction]]]]] = []
    for a in range(H):
        row_a = []
        for a2 in range(H):
            if a != a2:
                row_a.append([[pi1[a][k] * pi1[a2][k2] for k2 in range(R)] for k in range(R)])
                continue
            n_a = counts[a]
            if n_a < 2:
                row_a.append([[None] * R for _ in range(R)])
                continue
            block = []
            for k in range(R):
                block.append([
                    Fraction(int(n_ar[a, k]) * (int(n_ar[a, k2]) - (k == k2)), n_a * (n_a - 1))
                    for k2 in range(R)
                ])
            row_a.append(block)
        pi2.append(row_a)
    return pi1, pi2


_ProbabilityBuilder = Callable[[Design, Population, TreatmentSpace], ExactProbabilities]

# Further assignment mechanisms plug in here with their exact pi1/pi2 builder
_BUILDERS: Dict[DesignKind, _ProbabilityBuilder] = {
    DesignKind.RANDOM_PARTITION:
        lambda design, pop, space: _random_partition_probabilities(pop.counts, pop.K, space),
    DesignKind.COMPLETE_RANDOMIZATION:
        lambda design, pop, space: _complete_randomization_probabilities(
            pop.counts, design.composition, space),
}


@dataclass(frozen=True, eq=False)
class ProbabilityKernel:
    """Marginal and pairwise treatment probabilities with the derived constants d, c, b.

    Arrays are indexed by 0-based attribute and canonical peer-set positions:
    pi1 and b are (H, R); pi2, d and c are (H, H, R, R). Entries that are
    undefined (zero marginal probability, or no pair of distinct units) are nan.
    """
    design: Design
    counts: Tuple[int, ...]
    K: int
    pi1_exact: Tuple[Tuple[Fraction, ...], ...]
    pi2_exact: Tuple[Tuple[Tuple[Tuple[Optional[Fraction], ...], ...], ...], ...]
    pi1: np.ndarray
    pi2: np.ndarray
    d: np.ndarray
    c: np.ndarray
    b: np.ndarray

    @property
    def H(self) -> int:
        return len(self.counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def space(self) -> TreatmentSpace:
        return cached_space(self.H, self.K)

    @property
    def R(self) -> int:
        return self.pi1.shape[1]

    def expected_counts(self) -> np.ndarray:
        """E[n_[a]r] = n_[a] * pi_[a](r)"""
        return np.asarray(self.counts, dtype=float)[:, None] * self.pi1

    def to_dict(self) -> Dict[str, Any]:
        """Nested-list dump of pi, d, c and b (nan entries become null downstream)"""
        return {
            'design': self.design.to_dict(),
            'attribute_counts': list(self.counts),
            'pi': self.pi1.tolist(),
            'pi_pair': self.pi2.tolist(),
            'd': self.d.tolist(),
            'c': self.c.tolist(),
            'b': self.b.tolist(),
        }


def _derive_constants(counts: Tuple[int, ...], pi1: List[List[Fraction]],
                      pi2: List[List[List[List[Optional[Fraction]]]]]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    H, R = len(pi1), len(pi1[0])
    d = np.full((H, H, R, R), np.nan)
    c = np.full((H, H, R, R), np.nan)
    b = np.full((H, R), np.nan)
    for a in range(H):
        n_a = counts[a]
        for a2 in range(H):
            scale = math.sqrt(n_a * counts[a2])
            for k in range(R):
                for k2 in range(R):
                    joint = pi2[a][a2][k][k2]
                    if joint is None or pi1[a][k] == 0 or pi1[a2][k2] == 0:
                        continue
                    excess = joint / (pi1[a][k] * pi1[a2][k2]) - 1
                    if a != a2:
                        d[a, a2, k, k2] = scale * float(excess)
                        c[a, a2, k, k2] = d[a, a2, k, k2]
                        continue
                    # Same attribute: d = n_a * excess is rational, keep c exact
                    d_exact = n_a * excess
                    c_exact = Fraction(n_a - 1, n_a) * d_exact - 1
                    if k == k2:
                        c_exact += 1 / pi1[a][k]
                        b[a, k] = float(Fraction(n_a - 1, n_a) * (c_exact - d_exact) + 1)
                    d[a, a2, k, k2] = float(d_exact)
                    c[a, a2, k, k2] = float(c_exact)
    return d, c, b


def kernel(design: Design, population: Population) -> ProbabilityKernel:
    """Exact probability kernel for a design on a population"""
    if design.is_complete:
        require_feasible(design.composition, population)
    space = TreatmentSpace.for_population(population)
    pi1, pi2 = _BUILDERS[design.kind](design, population, space)

    pi1_float = np.array([[float(p) for p in row] for row in pi1])
    pi2_float = np.array(
        [[[[np.nan if p is None else float(p) for p in row] for row in block] for block in row_a]
         for row_a in pi2])
    d, c, b = _derive_constants(population.counts, pi1, pi2)
    for array in (pi1_float, pi2_float, d, c, b):
        array.setflags(write=False)

    logger.debug("Built %s kernel for counts %s, K=%d (|R|=%d)",
                 design.kind.value, population.counts, population.K, space.R)
    return ProbabilityKernel(
        design=design,
        counts=population.counts,
        K=population.K,
        pi1_exact=tuple(tuple(row) for row in pi1),
        pi2_exact=tuple(tuple(tuple(tuple(row) for row in block) for block in row_a) for row_a in pi2),
        pi1=pi1_float,
        pi2=pi2_float,
        d=d,
        c=c,
        b=b,
    )


def kernel_for_counts(design: Design, counts: Sequence[int], K: int) -> ProbabilityKernel:
    """Kernel from attribute counts alone, using synthetic unit ids"""
    return kernel(design, Population.from_counts(counts, K))
