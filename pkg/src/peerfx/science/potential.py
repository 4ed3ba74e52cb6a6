"""
Full potential-outcome tables and the estimands and variances they determine

Only simulations and oracle checks can supply a PotentialTable; nothing in the
user-facing analysis path depends on this module.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..core.spaces import TreatmentSpace
from ..design.kernel import ProbabilityKernel
from ..estimation.estimator import overall_variance, subgroup_variance
from ..estimation.joint import projection_matrix
from ..models.population import AttrMultiset, Population
from ..utils.error_handling import ValidationError


@dataclass(frozen=True, eq=False)
class PotentialTable:
    """Y_i(r) for every unit i (population order) and every r in canonical order"""
    population: Population
    values: np.ndarray   # (n, R)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        space = TreatmentSpace.for_population(self.population)
        if values.shape != (self.population.n, space.R):
            raise ValidationError(
                f"Potential table must have shape ({self.population.n}, {space.R}), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("Potential outcomes must be finite")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_function(cls, population: Population,
                      outcome: Callable[[int, AttrMultiset], float]) -> 'PotentialTable':
        """Tabulate outcome(unit position, peer attribute set)"""
        space = TreatmentSpace.for_population(population)
        return cls(population, np.array([[outcome(i, r) for r in space.peer_sets]
                                         for i in range(population.n)]))

    @property
    def space(self) -> TreatmentSpace:
        return TreatmentSpace.for_population(self.population)

    def _rows(self, a: int) -> np.ndarray:
        """Potential outcomes of attribute-a units (a 0-based)"""
        mask = np.asarray(self.population.attributes) == a + 1
        return self.values[mask]

    def observed(self, peer_sets: np.ndarray) -> np.ndarray:
        """Y_i = Y_i(R_i) for canonical peer-set positions R_i"""
        return self.values[np.arange(self.population.n), peer_sets]

    # Estimands

    def subgroup_means(self) -> np.ndarray:
        """(H, R) Ybar_[a](r)"""
        return np.array([self._rows(a).mean(axis=0) for a in range(self.population.H)])

    def overall_means(self) -> np.ndarray:
        """(R,) Ybar(r) = sum_a w_[a] Ybar_[a](r)"""
        return self.values.mean(axis=0)

    def subgroup_effect(self, a: int, k: int, k2: int) -> float:
        means = self.subgroup_means()
        return float(means[a, k] - means[a, k2])

    def overall_effect(self, k: int, k2: int) -> float:
        means = self.overall_means()
        return float(means[k] - means[k2])

    def theta(self) -> np.ndarray:
        """(n, R) centered potential outcomes theta_i(r)"""
        return self.values - self.values.mean(axis=1, keepdims=True)

    def subgroup_theta(self) -> np.ndarray:
        """(H, R) theta_[a](r)"""
        means = self.subgroup_means()
        return means - means.mean(axis=1, keepdims=True)

    # Finite-population variances

    def s2(self) -> np.ndarray:
        """(H, R) S^2_[a](r); zero for a single-unit attribute class"""
        return np.array([self._rows(a).var(axis=0, ddof=1) if self._rows(a).shape[0] > 1
                         else np.zeros(self.space.R) for a in range(self.population.H)])

    def s2_difference(self, a: int, k: int, k2: int) -> float:
        """S^2_[a](r - r') of the individual peer effects"""
        rows = self._rows(a)
        if rows.shape[0] < 2:
            return 0.0
        return float(np.var(rows[:, k] - rows[:, k2], ddof=1))

    def pair_products(self) -> np.ndarray:
        """(H, R, R) average of Y_i(r) Y_j(r') over ordered pairs i != j within each attribute"""
        H, R = self.population.H, self.space.R
        result = np.full((H, R, R), np.nan)
        for a in range(H):
            rows = self._rows(a)
            n_a = rows.shape[0]
            if n_a < 2:
                continue
            totals = rows.sum(axis=0)
            result[a] = (np.outer(totals, totals) - rows.T @ rows) / (n_a * (n_a - 1))
        return result

    def cross_products(self) -> np.ndarray:
        """(H, H, R, R) Ybar_[a](r) Ybar_[a'](r')"""
        means = self.subgroup_means()
        return means[:, None, :, None] * means[None, :, None, :]

    def is_additive(self, a: int, tolerance: float = 0.0) -> bool:
        rows = self._rows(a)
        centered = rows - rows.mean(axis=0)
        return bool(np.all(np.abs(centered - centered[:, :1]) <= tolerance))


def true_variance(table: PotentialTable, kernel: ProbabilityKernel,
                  k: int, k2: int) -> Dict[Optional[int], float]:
    """Exact sampling variance of tau_[a](r, r') for each a and of tau(r, r') (key None)"""
    if k == k2:
        raise ValidationError("Variance of a contrast between a peer set and itself is requested")
    s2 = table.s2()
    mean_square = table.subgroup_means() ** 2
    pair = table.pair_products()
    cross = table.cross_products()
    dropped = [table.s2_difference(a, k, k2) for a in range(kernel.H)]
    result: Dict[Optional[int], float] = {
        a: float(subgroup_variance(kernel, a, k, k2, s2, mean_square, pair, dropped[a]))
        for a in range(kernel.H)
    }
    result[None] = float(overall_variance(kernel, k, k2, s2, mean_square, pair, cross, dropped))
    return result


def true_joint_covariance(table: PotentialTable, counts: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Exact covariance of the centered estimator vector per attribute under complete randomization.

    ``counts`` holds n_[a]r implied by the composition vector; every cell must be nonempty.
    The heterogeneity term removes the finite-population covariance of theta_i / n_[a].
    """
    counts = np.asarray(counts)
    if np.any(counts < 1):
        raise ValidationError("Every (attribute, peer set) cell needs at least one unit")
    gamma = projection_matrix(table.space.R)
    s2 = table.s2()
    theta = table.theta()
    attributes = np.asarray(table.population.attributes)
    blocks = []
    for a in range(table.population.H):
        base = gamma @ np.diag(s2[a] / counts[a]) @ gamma
        rows = theta[attributes == a + 1]
        n_a = rows.shape[0]
        if n_a > 1:
            centered = rows - rows.mean(axis=0)
            base = base - centered.T @ centered / (n_a * (n_a - 1))
        blocks.append(base)
    return tuple(blocks)
